/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: tests/test_morphable.cpp
 *
 * Copyright 2026 The facekit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "facekit/morphable.hpp"
#include "facekit/rng.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>

using namespace facekit;

namespace {

SyntheticModel small_model(uint64_t seed = 0)
{
    SyntheticModelOptions options;
    options.seed = seed;
    options.vertex_target = 300;
    options.id_dims = 10;
    options.exp_dims = 4;
    options.tex_dims = 5;
    return synthesize_model(options);
}

Mat3 random_rotation(Rng& rng)
{
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    return Eigen::AngleAxisd(rng.uniform(0.1, 3.0), axis.normalized()).toRotationMatrix();
}

ShapeParams random_params(const MorphableModel& model, Rng& rng, double scale)
{
    ShapeParams params;
    params.alpha_id.resize(model.id_basis.cols());
    params.alpha_exp.resize(model.exp_basis.cols());
    for (int i = 0; i < params.alpha_id.size(); ++i)
        params.alpha_id[i] = scale * rng.normal();
    for (int i = 0; i < params.alpha_exp.size(); ++i)
        params.alpha_exp[i] = scale * rng.normal();
    return params;
}

} // namespace

TEST_CASE("evaluate_shape with zero parameters returns the mean")
{
    const SyntheticModel synth = small_model();
    ShapeParams zero;
    zero.alpha_id = Eigen::VectorXd::Zero(synth.model.id_basis.cols());
    zero.alpha_exp = Eigen::VectorXd::Zero(synth.model.exp_basis.cols());
    const Mesh mesh = evaluate_shape(synth.model, zero);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        CHECK((mesh.vertices[i] - Vec3(synth.model.mean_shape[3 * i],
                                       synth.model.mean_shape[3 * i + 1],
                                       synth.model.mean_shape[3 * i + 2]))
                  .norm() == 0.0);
}

TEST_CASE("evaluate_shape with a unit coefficient adds one basis column")
{
    const SyntheticModel synth = small_model();
    ShapeParams params;
    params.alpha_id = Eigen::VectorXd::Zero(synth.model.id_basis.cols());
    params.alpha_exp = Eigen::VectorXd::Zero(synth.model.exp_basis.cols());
    params.alpha_id[0] = 1.0;
    const Mesh mesh = evaluate_shape(synth.model, params);
    const Eigen::VectorXd expected = synth.model.mean_shape + synth.model.id_basis.col(0);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        CHECK((mesh.vertices[i] -
               Vec3(expected[3 * i], expected[3 * i + 1], expected[3 * i + 2]))
                  .norm() < 1e-12);
}

TEST_CASE("evaluate_shape rejects wrong parameter lengths with a named message")
{
    const SyntheticModel synth = small_model();
    ShapeParams params;
    params.alpha_id = Eigen::VectorXd::Zero(3);
    params.alpha_exp = Eigen::VectorXd::Zero(synth.model.exp_basis.cols());
    CHECK_THROWS_WITH_AS(evaluate_shape(synth.model, params),
                         doctest::Contains("expected 10"), std::invalid_argument);
}

TEST_CASE("least-squares recovery of random coefficients")
{
    // Oracle: with orthonormal joint shape columns the pseudoinverse is the
    // transpose, so coefficients are recoverable exactly.
    const SyntheticModel synth = small_model(2);
    Rng rng(17);
    const ShapeParams truth = random_params(synth.model, rng, 20.0);
    const Mesh mesh = evaluate_shape(synth.model, truth);
    Eigen::VectorXd flat(3 * mesh.vertex_count());
    for (int i = 0; i < mesh.vertex_count(); ++i)
        flat.segment<3>(3 * i) = mesh.vertices[i];
    Eigen::MatrixXd joint(synth.model.id_basis.rows(),
                          synth.model.id_basis.cols() + synth.model.exp_basis.cols());
    joint << synth.model.id_basis, synth.model.exp_basis;
    const Eigen::VectorXd alpha =
        joint.colPivHouseholderQr().solve(flat - synth.model.mean_shape);
    for (int i = 0; i < synth.model.id_basis.cols(); ++i)
        CHECK(alpha[i] == doctest::Approx(truth.alpha_id[i]).epsilon(1e-8));
    for (int i = 0; i < synth.model.exp_basis.cols(); ++i)
        CHECK(alpha[synth.model.id_basis.cols() + i] ==
              doctest::Approx(truth.alpha_exp[i]).epsilon(1e-8));
}

TEST_CASE("evaluate_shape is linear in the coefficients")
{
    const SyntheticModel synth = small_model(3);
    Rng rng(23);
    const ShapeParams a = random_params(synth.model, rng, 10.0);
    const ShapeParams b = random_params(synth.model, rng, 10.0);
    const double ca = 0.7, cb = -1.3;
    ShapeParams mix;
    mix.alpha_id = ca * a.alpha_id + cb * b.alpha_id;
    mix.alpha_exp = ca * a.alpha_exp + cb * b.alpha_exp;
    ShapeParams zero;
    zero.alpha_id = Eigen::VectorXd::Zero(a.alpha_id.size());
    zero.alpha_exp = Eigen::VectorXd::Zero(a.alpha_exp.size());
    const Mesh mean = evaluate_shape(synth.model, zero);
    const Mesh ma = evaluate_shape(synth.model, a);
    const Mesh mb = evaluate_shape(synth.model, b);
    const Mesh mmix = evaluate_shape(synth.model, mix);
    for (int i = 0; i < mean.vertex_count(); ++i)
    {
        const Vec3 lhs = mmix.vertices[i] - mean.vertices[i];
        const Vec3 rhs = ca * (ma.vertices[i] - mean.vertices[i]) +
                         cb * (mb.vertices[i] - mean.vertices[i]);
        CHECK((lhs - rhs).norm() < 1e-9);
    }
}

TEST_CASE("rigid_project basics")
{
    Mesh mesh;
    mesh.vertices = {{1, 1, 1}};
    SUBCASE("identity")
    {
        const Mesh out = rigid_project(mesh, CameraPose{});
        CHECK((out.vertices[0] - Vec3(1, 1, 1)).norm() == 0.0);
    }
    SUBCASE("pure scale")
    {
        CameraPose pose;
        pose.f = 2.0;
        const Mesh out = rigid_project(mesh, pose);
        CHECK((out.vertices[0] - Vec3(2, 2, 2)).norm() == 0.0);
    }
    SUBCASE("hand rotation: 90 degrees about z plus translation")
    {
        mesh.vertices = {{1, 0, 0}};
        CameraPose pose;
        pose.R << 0, -1, 0, 1, 0, 0, 0, 0, 1;
        pose.t3d = Vec3(10, 0, 0);
        const Mesh out = rigid_project(mesh, pose);
        CHECK((out.vertices[0] - Vec3(10, 1, 0)).norm() < 1e-12);
    }
}

TEST_CASE("camera pose invariants are enforced")
{
    CameraPose pose;
    pose.f = -1.0;
    CHECK_THROWS_AS(pose.validate(), std::invalid_argument);
    pose.f = 1.0;
    pose.R(0, 0) = 2.0;
    CHECK_THROWS_AS(pose.validate(), std::invalid_argument);
    pose.R = -Mat3::Identity(); // orthonormal but det = -1
    CHECK_THROWS_AS(pose.validate(), std::invalid_argument);
}

TEST_CASE("fit_rigid exact cases")
{
    Rng rng(31);
    std::vector<Vec3> source;
    for (int i = 0; i < 20; ++i)
        source.emplace_back(rng.normal(), rng.normal(), rng.normal());
    SUBCASE("target equals source")
    {
        const CameraPose pose = fit_rigid(source, source);
        CHECK(std::abs(pose.f - 1.0) < 1e-10);
        CHECK((pose.R - Mat3::Identity()).norm() < 1e-10);
        CHECK(pose.t3d.norm() < 1e-10);
    }
    SUBCASE("constructed scale and translation")
    {
        std::vector<Vec3> target;
        for (const Vec3& s : source)
            target.push_back(3.0 * s + Vec3(1, 2, 3));
        const CameraPose pose = fit_rigid(source, target);
        CHECK(pose.f == doctest::Approx(3.0).epsilon(1e-12));
        CHECK((pose.R - Mat3::Identity()).norm() < 1e-10);
        CHECK((pose.t3d - Vec3(1, 2, 3)).norm() < 1e-9);
    }
}

TEST_CASE("fit_rigid recovers synthetic similarity transforms under noise")
{
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Mat3 rot = random_rotation(rng);
        const double f = rng.uniform(0.5, 3.0);
        const Vec3 t(rng.normal() * 10, rng.normal() * 10, rng.normal() * 10);
        std::vector<Vec3> source, target;
        for (int i = 0; i < 50; ++i)
        {
            const Vec3 s(rng.normal(), rng.normal(), rng.normal());
            source.push_back(s);
            target.push_back(f * (rot * s) + t +
                             1e-6 * Vec3(rng.normal(), rng.normal(), rng.normal()));
        }
        const CameraPose pose = fit_rigid(source, target);
        const double angle =
            Eigen::AngleAxisd(pose.R.transpose() * rot).angle();
        CHECK(angle < 1e-4);
        CHECK(std::abs(pose.f - f) / f < 1e-4);
        CHECK((pose.t3d - t).norm() < 1e-4 * (1.0 + t.norm()));
    }
}

TEST_CASE("fit_rigid error paths")
{
    std::vector<Vec3> two = {{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(fit_rigid(two, two), std::invalid_argument);
    std::vector<Vec3> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_THROWS_AS(fit_rigid(line, line), std::invalid_argument);
    std::vector<Vec3> three = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    std::vector<Vec3> mismatched = {{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(fit_rigid(three, mismatched), std::invalid_argument);
}

TEST_CASE("fit_rigid handles planar configurations with proper rotations")
{
    // Planar clouds drop one singular value; the reflection correction must
    // still produce det R = +1.
    Rng rng(41);
    std::vector<Vec3> source, target;
    const Mat3 rot = random_rotation(rng);
    for (int i = 0; i < 12; ++i)
    {
        const Vec3 s(rng.normal(), rng.normal(), 0.0);
        source.push_back(s);
        target.push_back(1.7 * (rot * s) + Vec3(4, 5, 6));
    }
    const CameraPose pose = fit_rigid(source, target);
    CHECK(pose.R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    for (size_t i = 0; i < source.size(); ++i)
        CHECK((pose.apply(source[i]) - target[i]).norm() < 1e-9);
}

TEST_CASE("fit_rigid is left-invariant under a common rotation")
{
    Rng rng(43);
    std::vector<Vec3> source, target;
    for (int i = 0; i < 30; ++i)
    {
        source.emplace_back(rng.normal(), rng.normal(), rng.normal());
        target.emplace_back(rng.normal(), rng.normal(), rng.normal());
    }
    const CameraPose base = fit_rigid(source, target);
    double base_residual = 0.0;
    for (size_t i = 0; i < source.size(); ++i)
        base_residual += (base.apply(source[i]) - target[i]).squaredNorm();
    for (int trial = 0; trial < 5; ++trial)
    {
        const Mat3 q = random_rotation(rng);
        std::vector<Vec3> qs, qt;
        for (size_t i = 0; i < source.size(); ++i)
        {
            qs.push_back(q * source[i]);
            qt.push_back(q * target[i]);
        }
        const CameraPose pose = fit_rigid(qs, qt);
        CHECK((pose.R - q * base.R * q.transpose()).norm() < 1e-8);
        double residual = 0.0;
        for (size_t i = 0; i < qs.size(); ++i)
            residual += (pose.apply(qs[i]) - qt[i]).squaredNorm();
        CHECK(residual == doctest::Approx(base_residual).epsilon(1e-8));
    }
}

TEST_CASE("disentangle_rigid inverts a constructed pose")
{
    const SyntheticModel synth = small_model(5);
    ShapeParams zero;
    zero.alpha_id = Eigen::VectorXd::Zero(synth.model.id_basis.cols());
    zero.alpha_exp = Eigen::VectorXd::Zero(synth.model.exp_basis.cols());
    const Mesh mean = evaluate_shape(synth.model, zero);
    Rng rng(47);
    CameraPose pose;
    pose.f = 1.8;
    pose.R = random_rotation(rng);
    pose.t3d = Vec3(30, -12, 500);

    SUBCASE("mean shape round trips exactly")
    {
        const Mesh registered = rigid_project(mean, pose);
        const auto [shape, recovered] = disentangle_rigid(registered, mean);
        CHECK(std::abs(recovered.f - pose.f) < 1e-9);
        CHECK((recovered.R - pose.R).norm() < 1e-9);
        CHECK((recovered.t3d - pose.t3d).norm() < 1e-7);
        for (int i = 0; i < mean.vertex_count(); ++i)
            CHECK((shape.vertices[i] - mean.vertices[i]).norm() < 1e-8);
        // Composing the recovered pose reproduces the registered mesh.
        const Mesh reprojected = rigid_project(shape, recovered);
        for (int i = 0; i < mean.vertex_count(); ++i)
            CHECK((reprojected.vertices[i] - registered.vertices[i]).norm() < 1e-9);
    }

    SUBCASE("identity pose leaves the registered mesh unchanged")
    {
        const auto [shape, recovered] = disentangle_rigid(mean, mean);
        CHECK(std::abs(recovered.f - 1.0) < 1e-9);
        for (int i = 0; i < mean.vertex_count(); ++i)
            CHECK((shape.vertices[i] - mean.vertices[i]).norm() < 1e-9);
    }

    SUBCASE("construct-then-invert recovers a fit-neutral displacement")
    {
        // Displacement chosen orthogonal to the similarity-fit modes: zero
        // mean and zero cross-covariance with the centered template, so the
        // pose estimate is unaffected and the displacement returns exactly.
        const int n = mean.vertex_count();
        Vec3 centroid = Vec3::Zero();
        for (const Vec3& v : mean.vertices)
            centroid += v;
        centroid /= n;
        std::vector<Vec3> disp(n);
        Vec3 disp_mean = Vec3::Zero();
        for (int i = 0; i < n; ++i)
        {
            disp[i] = Vec3(rng.normal(), rng.normal(), rng.normal());
            disp_mean += disp[i];
        }
        disp_mean /= n;
        for (Vec3& d : disp)
            d -= disp_mean;
        Mat3 cross = Mat3::Zero();
        Mat3 cov = Mat3::Zero();
        for (int i = 0; i < n; ++i)
        {
            const Vec3 c = mean.vertices[i] - centroid;
            cross += disp[i] * c.transpose();
            cov += c * c.transpose();
        }
        const Mat3 correction = cross * cov.inverse();
        disp_mean = Vec3::Zero();
        for (int i = 0; i < n; ++i)
        {
            disp[i] -= correction * (mean.vertices[i] - centroid);
            disp_mean += disp[i];
        }
        disp_mean /= n;
        for (Vec3& d : disp)
            d -= disp_mean;

        Mesh displaced = mean;
        for (int i = 0; i < n; ++i)
            displaced.vertices[i] += disp[i];
        const Mesh registered = rigid_project(displaced, pose);
        const auto [shape, recovered] = disentangle_rigid(registered, mean);
        CHECK(std::abs(recovered.f - pose.f) < 1e-6);
        for (int i = 0; i < n; ++i)
            CHECK((shape.vertices[i] - mean.vertices[i] - disp[i]).norm() < 1e-6);
    }
}

TEST_CASE("shape_residual")
{
    const SyntheticModel synth = small_model(6);
    Rng rng(53);
    const ShapeParams params = random_params(synth.model, rng, 15.0);
    const Mesh coarse = evaluate_shape(synth.model, params);
    SUBCASE("exact fit gives zero residual")
    {
        for (const Vec3& d : shape_residual(coarse, synth.model, params))
            CHECK(d.norm() == 0.0);
    }
    SUBCASE("constant offset comes back verbatim")
    {
        Mesh gt = coarse;
        for (Vec3& v : gt.vertices)
            v += Vec3(1, -2, 3);
        for (const Vec3& d : shape_residual(gt, synth.model, params))
            CHECK((d - Vec3(1, -2, 3)).norm() == 0.0);
    }
    SUBCASE("additive round trip is exact")
    {
        Mesh gt = coarse;
        for (Vec3& v : gt.vertices)
            v += Vec3(rng.normal(), rng.normal(), rng.normal());
        const std::vector<Vec3> delta = shape_residual(gt, synth.model, params);
        for (int i = 0; i < gt.vertex_count(); ++i)
            CHECK((coarse.vertices[i] + delta[i] - gt.vertices[i]).norm() == 0.0);
    }
}

TEST_CASE("model container round trip")
{
    const std::string path =
        (std::filesystem::temp_directory_path() / "facekit_test_model.mm3d").string();
    const SyntheticModel synth = small_model(9);
    synth.model.save(path);
    const MorphableModel loaded = MorphableModel::load(path);
    CHECK(loaded.vertex_count() == synth.model.vertex_count());
    CHECK(loaded.id_basis.cols() == synth.model.id_basis.cols());
    CHECK(loaded.triangles == synth.model.triangles);
    CHECK((loaded.mean_shape - synth.model.mean_shape).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((loaded.id_basis - synth.model.id_basis).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((loaded.tex_basis - synth.model.tex_basis).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE(loaded.uv.size() == synth.model.uv.size());
    std::remove(path.c_str());
}

TEST_CASE("synthetic model is deterministic in the seed")
{
    const SyntheticModel a = small_model(123);
    const SyntheticModel b = small_model(123);
    const SyntheticModel c = small_model(124);
    CHECK(a.model.mean_shape == b.model.mean_shape);
    CHECK(a.model.id_basis == b.model.id_basis);
    CHECK(a.model.id_basis != c.model.id_basis);
    CHECK(a.mirror_map == b.mirror_map);
    CHECK(a.interocular_distance() > 10.0);

    // Basis columns are orthonormal.
    Eigen::MatrixXd joint(a.model.id_basis.rows(),
                          a.model.id_basis.cols() + a.model.exp_basis.cols());
    joint << a.model.id_basis, a.model.exp_basis;
    const Eigen::MatrixXd gram = joint.transpose() * joint;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <
          1e-10);
}
