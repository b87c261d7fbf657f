/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: tests/test_mesh.cpp
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
#include "facekit/fixtures.hpp"
#include "facekit/mesh.hpp"
#include "facekit/obj_io.hpp"
#include "facekit/rng.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>

using namespace facekit;

namespace {

Mesh single_triangle()
{
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.triangles = {{0, 1, 2}};
    return mesh;
}

Mat3 rotation_from_axis_angle(const Vec3& axis, double angle)
{
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

std::string temp_path(const char* name)
{
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("vertex normals of a single planar triangle")
{
    const VertexNormalField normals = compute_vertex_normals(single_triangle());
    REQUIRE(normals.size() == 3);
    for (const Vec3& n : normals)
        CHECK((n - Vec3(0, 0, 1)).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("vertex normals flip with winding")
{
    Mesh mesh = single_triangle();
    std::swap(mesh.triangles[0][1], mesh.triangles[0][2]);
    for (const Vec3& n : compute_vertex_normals(mesh))
        CHECK((n - Vec3(0, 0, -1)).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("icosphere normals track the radial direction")
{
    const Mesh sphere = make_icosphere(2);
    const VertexNormalField normals = compute_vertex_normals(sphere);
    double worst_deg = 0.0;
    for (size_t i = 0; i < normals.size(); ++i)
    {
        const Vec3 radial = sphere.vertices[i].normalized();
        const double angle =
            std::acos(std::clamp(normals[i].dot(radial), -1.0, 1.0)) * 180.0 / M_PI;
        worst_deg = std::max(worst_deg, angle);
    }
    CHECK(worst_deg < 2.0);
}

TEST_CASE("degenerate triangles do not contribute to normals")
{
    Mesh mesh = single_triangle();
    mesh.vertices.push_back(Vec3(2, 2, 0));
    mesh.vertices.push_back(Vec3(3, 3, 0));
    // A zero-area sliver touching vertex 0 must not corrupt its normal.
    mesh.triangles.push_back({0, 3, 3});
    mesh.triangles.push_back({3, 4, 2});
    const VertexNormalField normals = compute_vertex_normals(mesh);
    CHECK((normals[0] - Vec3(0, 0, 1)).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("vertex without incident non-degenerate triangle is an error")
{
    Mesh mesh = single_triangle();
    mesh.vertices.push_back(Vec3(5, 5, 5));
    mesh.triangles.push_back({3, 3, 3});
    CHECK_THROWS_WITH_AS(compute_vertex_normals(mesh), doctest::Contains("vertex 3"),
                         std::runtime_error);
}

TEST_CASE("normals are rotation-equivariant")
{
    const Mesh sphere = make_icosphere(1);
    const VertexNormalField base = compute_vertex_normals(sphere);
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial)
    {
        const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
        const Mat3 rot = rotation_from_axis_angle(axis, rng.uniform(0.1, 3.0));
        Mesh rotated = sphere;
        for (Vec3& v : rotated.vertices)
            v = rot * v;
        const VertexNormalField turned = compute_vertex_normals(rotated);
        for (size_t i = 0; i < base.size(); ++i)
            CHECK((turned[i] - rot * base[i]).norm() < 1e-9);
    }
}

TEST_CASE("uv map sampling")
{
    SUBCASE("all-zero map")
    {
        const UvDisplacementMap map(4, 4);
        CHECK(map.sample(Vec2(0.3, 0.7)).norm() == 0.0);
    }
    SUBCASE("constant map returns the constant")
    {
        UvDisplacementMap map(5, 3, Vec3(1, 2, 3));
        CHECK((map.sample(Vec2(0.21, 0.77)) - Vec3(1, 2, 3)).norm() ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("hand-computed bilinear weights on a 2x2 map")
    {
        UvDisplacementMap map(2, 2);
        map.at(0, 0) = Vec3(0, 0, 0);
        map.at(1, 0) = Vec3(1, 0, 0);
        map.at(0, 1) = Vec3(0, 1, 0);
        map.at(1, 1) = Vec3(1, 1, 0);
        CHECK((map.sample(Vec2(0.5, 0.5)) - Vec3(0.5, 0.5, 0)).norm() ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("uv = 1 uses closed-interval semantics")
    {
        UvDisplacementMap map(3, 3);
        map.at(2, 2) = Vec3(9, 9, 9);
        CHECK((map.sample(Vec2(1.0, 1.0)) - Vec3(9, 9, 9)).norm() ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("outside the unit square is an error")
    {
        const UvDisplacementMap map(4, 4);
        CHECK_THROWS_AS(map.sample(Vec2(-0.01, 0.5)), std::out_of_range);
        CHECK_THROWS_AS(map.sample(Vec2(0.5, 1.01)), std::out_of_range);
    }
}

TEST_CASE("uv sampling is Lipschitz against the map's finite differences")
{
    Rng rng(11);
    UvDisplacementMap map(9, 7);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x)
            map.at(x, y) = Vec3(rng.normal(), rng.normal(), rng.normal());
    double lips = 0.0;
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x)
        {
            if (x + 1 < 9)
                lips = std::max(lips, (map.at(x + 1, y) - map.at(x, y)).norm() * 8);
            if (y + 1 < 7)
                lips = std::max(lips, (map.at(x, y + 1) - map.at(x, y)).norm() * 6);
        }
    // Bilinear patches can combine both axis slopes.
    lips *= 2.0;
    for (int trial = 0; trial < 200; ++trial)
    {
        const Vec2 uv(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
        const double eps = rng.uniform(1e-5, 1e-3);
        Vec2 uv2 = uv + Vec2(rng.normal(), rng.normal()).normalized() * eps;
        uv2 = uv2.cwiseMax(0.0).cwiseMin(1.0);
        const double moved = (map.sample(uv2) - map.sample(uv)).norm();
        CHECK(moved <= lips * (uv2 - uv).norm() + 1e-12);
    }
}

TEST_CASE("apply_displacement")
{
    Mesh coarse = single_triangle();
    coarse.uv = {{0, 0}, {1, 0}, {0, 1}};
    SUBCASE("zero map is the identity")
    {
        const Mesh out = apply_displacement(coarse, UvDisplacementMap(4, 4));
        for (size_t i = 0; i < out.vertices.size(); ++i)
            CHECK((out.vertices[i] - coarse.vertices[i]).norm() == 0.0);
    }
    SUBCASE("constant map shifts every vertex")
    {
        const Mesh out = apply_displacement(coarse, UvDisplacementMap(4, 4, Vec3(0, 0, 5)));
        for (size_t i = 0; i < out.vertices.size(); ++i)
            CHECK((out.vertices[i] - coarse.vertices[i] - Vec3(0, 0, 5)).norm() ==
                  doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("per-vertex difference recovers the sampled displacement exactly")
    {
        Rng rng(3);
        UvDisplacementMap map(6, 6);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                map.at(x, y) = Vec3(rng.normal(), rng.normal(), rng.normal());
        const Mesh out = apply_displacement(coarse, map);
        CHECK(out.triangles == coarse.triangles);
        for (size_t i = 0; i < out.vertices.size(); ++i)
        {
            const Vec3 recovered = out.vertices[i] - coarse.vertices[i];
            CHECK((recovered - map.sample(coarse.uv[i])).norm() == 0.0);
        }
    }
    SUBCASE("missing uv coordinates is an error")
    {
        CHECK_THROWS_AS(apply_displacement(single_triangle(), UvDisplacementMap(4, 4)),
                        std::invalid_argument);
    }
}

TEST_CASE("obj round trip preserves geometry, uv and faces")
{
    const std::string path = temp_path("facekit_test_mesh.obj");
    Mesh mesh = make_icosphere(1, 2.5);
    mesh.uv.resize(mesh.vertices.size());
    Rng rng(5);
    for (Vec2& uv : mesh.uv)
        uv = Vec2(rng.uniform(), rng.uniform());
    write_obj(mesh, path);
    const Mesh loaded = read_obj(path);
    REQUIRE(loaded.vertex_count() == mesh.vertex_count());
    REQUIRE(loaded.triangles == mesh.triangles);
    for (int i = 0; i < mesh.vertex_count(); ++i)
    {
        CHECK((loaded.vertices[i] - mesh.vertices[i]).norm() < 1e-7);
        CHECK((loaded.uv[i] - mesh.uv[i]).norm() < 1e-7);
    }
    std::remove(path.c_str());
}

TEST_CASE("obj reader accepts v, v/vt and v/vt/vn face forms")
{
    const std::string path = temp_path("facekit_test_forms.obj");
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
                   "vt 0 0\nvt 1 0\nvt 0 1\nvt 1 1\n"
                   "vn 0 0 1\n"
                   "f 1 2 3\n"
                   "f 2/2 4/4 3/3\n"
                   "f 1/1/1 2/2/1 4/4/1\n",
                   f);
        std::fclose(f);
    }
    const Mesh mesh = read_obj(path);
    CHECK(mesh.vertex_count() == 4);
    CHECK(mesh.triangle_count() == 3);
    CHECK(mesh.has_uv());
    CHECK((mesh.uv[3] - Vec2(1, 1)).norm() == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("uv displacement map binary round trip")
{
    const std::string path = temp_path("facekit_test.uvdm");
    Rng rng(9);
    UvDisplacementMap map(10, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 10; ++x)
            map.at(x, y) = Vec3(rng.normal(), rng.normal(), rng.normal());
    map.save(path);
    const UvDisplacementMap loaded = UvDisplacementMap::load(path);
    REQUIRE(loaded.width() == 10);
    REQUIRE(loaded.height() == 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 10; ++x)
            CHECK((loaded.at(x, y) - map.at(x, y)).norm() < 1e-6);

    std::FILE* f = std::fopen(path.c_str(), "rb");
    char magic[4];
    REQUIRE(std::fread(magic, 1, 4, f) == 4);
    std::fclose(f);
    CHECK(std::string(magic, 4) == "UVDM");
    std::remove(path.c_str());
}
