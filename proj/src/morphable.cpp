/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/morphable.cpp
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

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace facekit {

namespace {

void write_f32(std::ofstream& out, const double* data, size_t count)
{
    for (size_t i = 0; i < count; ++i)
    {
        const float f = static_cast<float>(data[i]);
        out.write(reinterpret_cast<const char*>(&f), 4);
    }
}

void read_f32(std::ifstream& in, double* data, size_t count)
{
    for (size_t i = 0; i < count; ++i)
    {
        float f;
        in.read(reinterpret_cast<char*>(&f), 4);
        data[i] = f;
    }
}

void write_u32(std::ofstream& out, uint32_t v)
{
    out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& in)
{
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

} // namespace

void MorphableModel::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("MorphableModel::save: cannot open " + path);
    out.write("MM3D", 4);
    write_u32(out, static_cast<uint32_t>(vertex_count()));
    write_u32(out, static_cast<uint32_t>(id_basis.cols()));
    write_u32(out, static_cast<uint32_t>(exp_basis.cols()));
    write_u32(out, static_cast<uint32_t>(tex_basis.cols()));
    write_u32(out, static_cast<uint32_t>(triangles.size()));
    write_u32(out, uv.empty() ? 0u : 1u);
    write_f32(out, mean_shape.data(), mean_shape.size());
    write_f32(out, id_basis.data(), id_basis.size());
    write_f32(out, exp_basis.data(), exp_basis.size());
    write_f32(out, mean_texture.data(), mean_texture.size());
    write_f32(out, tex_basis.data(), tex_basis.size());
    for (const auto& tri : triangles)
        for (int c = 0; c < 3; ++c)
            write_u32(out, static_cast<uint32_t>(tri[c]));
    for (const Vec2& t : uv)
    {
        const double xy[2] = {t.x(), t.y()};
        write_f32(out, xy, 2);
    }
    if (!out)
        throw std::runtime_error("MorphableModel::save: write failed for " + path);
}

MorphableModel MorphableModel::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("MorphableModel::load: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MM3D", 4) != 0)
        throw std::runtime_error("MorphableModel::load: bad magic in " + path);
    const uint32_t n = read_u32(in);
    const uint32_t k_id = read_u32(in);
    const uint32_t k_exp = read_u32(in);
    const uint32_t k_tex = read_u32(in);
    const uint32_t n_tri = read_u32(in);
    const uint32_t has_uv = read_u32(in);
    if (!in || n == 0 || n > (1u << 24))
        throw std::runtime_error("MorphableModel::load: bad header in " + path);
    MorphableModel model;
    model.mean_shape.resize(3 * n);
    model.id_basis.resize(3 * n, k_id);
    model.exp_basis.resize(3 * n, k_exp);
    model.mean_texture.resize(3 * n);
    model.tex_basis.resize(3 * n, k_tex);
    read_f32(in, model.mean_shape.data(), model.mean_shape.size());
    read_f32(in, model.id_basis.data(), model.id_basis.size());
    read_f32(in, model.exp_basis.data(), model.exp_basis.size());
    read_f32(in, model.mean_texture.data(), model.mean_texture.size());
    read_f32(in, model.tex_basis.data(), model.tex_basis.size());
    model.triangles.resize(n_tri);
    for (auto& tri : model.triangles)
        for (int c = 0; c < 3; ++c)
        {
            const uint32_t idx = read_u32(in);
            if (idx >= n)
                throw std::runtime_error("MorphableModel::load: triangle index out of range");
            tri[c] = static_cast<int>(idx);
        }
    if (has_uv)
    {
        model.uv.resize(n);
        for (Vec2& t : model.uv)
        {
            double xy[2];
            read_f32(in, xy, 2);
            t = Vec2(xy[0], xy[1]);
        }
    }
    if (!in)
        throw std::runtime_error("MorphableModel::load: truncated file " + path);
    return model;
}

void CameraPose::validate() const
{
    if (!(f > 0.0))
        throw std::invalid_argument("CameraPose: scale must be positive");
    if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("CameraPose: R is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > 1e-9)
        throw std::invalid_argument("CameraPose: det R must be +1");
}

Mesh evaluate_shape(const MorphableModel& model, const ShapeParams& params)
{
    if (params.alpha_id.size() != model.id_basis.cols())
        throw std::invalid_argument("evaluate_shape: alpha_id has " +
                                    std::to_string(params.alpha_id.size()) + " entries, expected " +
                                    std::to_string(model.id_basis.cols()));
    if (params.alpha_exp.size() != model.exp_basis.cols())
        throw std::invalid_argument("evaluate_shape: alpha_exp has " +
                                    std::to_string(params.alpha_exp.size()) +
                                    " entries, expected " + std::to_string(model.exp_basis.cols()));
    Eigen::VectorXd flat = model.mean_shape;
    if (params.alpha_id.size() > 0)
        flat += model.id_basis * params.alpha_id;
    if (params.alpha_exp.size() > 0)
        flat += model.exp_basis * params.alpha_exp;
    Mesh mesh;
    mesh.vertices.resize(model.vertex_count());
    for (int i = 0; i < model.vertex_count(); ++i)
        mesh.vertices[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
    mesh.triangles = model.triangles;
    mesh.uv = model.uv;
    return mesh;
}

std::vector<Vec3> evaluate_texture(const MorphableModel& model, const Eigen::VectorXd& beta)
{
    if (beta.size() != model.tex_basis.cols())
        throw std::invalid_argument("evaluate_texture: beta has " + std::to_string(beta.size()) +
                                    " entries, expected " + std::to_string(model.tex_basis.cols()));
    Eigen::VectorXd flat = model.mean_texture;
    if (beta.size() > 0)
        flat += model.tex_basis * beta;
    std::vector<Vec3> colors(model.vertex_count());
    for (int i = 0; i < model.vertex_count(); ++i)
        colors[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
    return colors;
}

Mesh rigid_project(const Mesh& mesh, const CameraPose& pose)
{
    pose.validate();
    Mesh out = mesh;
    for (Vec3& v : out.vertices)
        v = pose.apply(v);
    return out;
}

CameraPose fit_rigid(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                     const std::vector<double>& weights)
{
    if (source.size() != target.size())
        throw std::invalid_argument("fit_rigid: point lists differ in length");
    if (source.size() < 3)
        throw std::invalid_argument("fit_rigid: need at least 3 point pairs");
    if (!weights.empty() && weights.size() != source.size())
        throw std::invalid_argument("fit_rigid: weight count does not match points");

    double w_sum = 0.0;
    Vec3 mean_s = Vec3::Zero();
    Vec3 mean_t = Vec3::Zero();
    for (size_t i = 0; i < source.size(); ++i)
    {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (w < 0.0)
            throw std::invalid_argument("fit_rigid: negative weight");
        w_sum += w;
        mean_s += w * source[i];
        mean_t += w * target[i];
    }
    if (w_sum <= 0.0)
        throw std::invalid_argument("fit_rigid: total weight is zero");
    mean_s /= w_sum;
    mean_t /= w_sum;

    Mat3 cross_cov = Mat3::Zero();
    double source_var = 0.0;
    for (size_t i = 0; i < source.size(); ++i)
    {
        const double w = weights.empty() ? 1.0 : weights[i];
        const Vec3 s = source[i] - mean_s;
        const Vec3 t = target[i] - mean_t;
        cross_cov += w * t * s.transpose();
        source_var += w * s.squaredNorm();
    }
    if (source_var <= 1e-24)
        throw std::invalid_argument("fit_rigid: source points are coincident");

    Eigen::JacobiSVD<Mat3> svd(cross_cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sigma = svd.singularValues();
    // Collinear configurations leave the rotation about the common axis free.
    if (sigma[1] <= 1e-12 * std::max(sigma[0], 1e-300))
        throw std::invalid_argument("fit_rigid: rank-deficient (collinear) configuration");
    Vec3 signs(1.0, 1.0, 1.0);
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
        signs[2] = -1.0;
    CameraPose pose;
    pose.R = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
    pose.f = (sigma.array() * signs.array()).sum() / source_var;
    if (!(pose.f > 0.0))
        throw std::invalid_argument("fit_rigid: degenerate configuration (non-positive scale)");
    pose.t3d = mean_t - pose.f * (pose.R * mean_s);
    return pose;
}

std::pair<Mesh, CameraPose> disentangle_rigid(const Mesh& registered,
                                              const Mesh& template_estimate)
{
    if (registered.vertex_count() != template_estimate.vertex_count())
        throw std::invalid_argument("disentangle_rigid: vertex counts differ");
    const CameraPose pose = fit_rigid(template_estimate.vertices, registered.vertices);
    Mesh shape = registered;
    const Mat3 r_inv = pose.R.transpose();
    for (Vec3& v : shape.vertices)
        v = r_inv * (v - pose.t3d) / pose.f;
    return {shape, pose};
}

std::vector<Vec3> shape_residual(const Mesh& gt, const MorphableModel& model,
                                 const ShapeParams& params)
{
    const Mesh coarse = evaluate_shape(model, params);
    if (gt.vertex_count() != coarse.vertex_count())
        throw std::invalid_argument("shape_residual: topology mismatch");
    std::vector<Vec3> delta(gt.vertices.size());
    for (size_t i = 0; i < delta.size(); ++i)
        delta[i] = gt.vertices[i] - coarse.vertices[i];
    return delta;
}

Mat3 rotation_pitch_yaw(double pitch_deg, double yaw_deg)
{
    const double p = pitch_deg * M_PI / 180.0;
    const double y = yaw_deg * M_PI / 180.0;
    Mat3 rx, ry;
    rx << 1, 0, 0, 0, std::cos(p), -std::sin(p), 0, std::sin(p), std::cos(p);
    ry << std::cos(y), 0, std::sin(y), 0, 1, 0, -std::sin(y), 0, std::cos(y);
    return rx * ry;
}

namespace {

// Low-frequency 2D modes on the unit square; enough of them to span all basis columns.
double grid_mode(int mode, double t)
{
    switch (mode)
    {
    case 0: return 1.0;
    case 1: return std::cos(M_PI * t);
    case 2: return std::sin(M_PI * t);
    default: return std::cos(2.0 * M_PI * t);
    }
}

} // namespace

Eigen::VectorXd smooth_grid_field(Rng& rng, int rows, int cols, double amplitude)
{
    Eigen::VectorXd field(3 * rows * cols);
    double coeff[3][4][4];
    for (int d = 0; d < 3; ++d)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                coeff[d][i][j] = amplitude * rng.normal();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
        {
            const double tr = rows > 1 ? static_cast<double>(r) / (rows - 1) : 0.0;
            const double tc = cols > 1 ? static_cast<double>(c) / (cols - 1) : 0.0;
            for (int d = 0; d < 3; ++d)
            {
                double v = 0.0;
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                        v += coeff[d][i][j] * grid_mode(i, tr) * grid_mode(j, tc);
                field[3 * (r * cols + c) + d] = v;
            }
        }
    return field;
}

namespace {

// Modified Gram-Schmidt with a second pass; throws if a column degenerates.
void orthonormalize_columns(Eigen::MatrixXd& basis)
{
    for (int k = 0; k < basis.cols(); ++k)
    {
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < k; ++j)
                basis.col(k) -= basis.col(j).dot(basis.col(k)) * basis.col(j);
        const double norm = basis.col(k).norm();
        if (norm < 1e-10)
            throw std::runtime_error("synthesize_model: degenerate basis column");
        basis.col(k) /= norm;
    }
}

} // namespace

double SyntheticModel::interocular_distance() const
{
    const Vec3 l(model.mean_shape[3 * left_eye_center], model.mean_shape[3 * left_eye_center + 1],
                 model.mean_shape[3 * left_eye_center + 2]);
    const Vec3 r(model.mean_shape[3 * right_eye_center],
                 model.mean_shape[3 * right_eye_center + 1],
                 model.mean_shape[3 * right_eye_center + 2]);
    return (l - r).norm();
}

SyntheticModel synthesize_model(const SyntheticModelOptions& options)
{
    if (options.vertex_target < 16)
        throw std::invalid_argument("synthesize_model: vertex_target too small");
    SyntheticModel synth;
    // Grid aspect roughly matches a face (taller than wide).
    int cols = static_cast<int>(std::lround(std::sqrt(options.vertex_target / 1.25)));
    if (cols % 2 == 0)
        ++cols; // odd column count keeps an exact mirror axis
    const int rows = static_cast<int>(std::lround(static_cast<double>(options.vertex_target) / cols));
    synth.rows = rows;
    synth.cols = cols;
    const int n = rows * cols;

    const double theta_min = 25.0, theta_max = 155.0;
    const double phi_max = 100.0;
    const double ax = 65.0, by = 85.0, cz = 75.0; // ellipsoid semi-axes, millimetres

    MorphableModel& model = synth.model;
    model.mean_shape.resize(3 * n);
    model.uv.resize(n);
    synth.regions.assign(n, SyntheticModel::kCheek);
    synth.mirror_map.resize(n);
    synth.theta_deg.resize(n);
    synth.phi_deg.resize(n);

    std::vector<double>& thetas = synth.theta_deg;
    std::vector<double>& phis = synth.phi_deg;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
        {
            const int i = r * cols + c;
            const double theta = theta_min + (theta_max - theta_min) * r / (rows - 1);
            const double phi = -phi_max + 2.0 * phi_max * c / (cols - 1);
            thetas[i] = theta;
            phis[i] = phi;
            const double st = std::sin(theta * M_PI / 180.0);
            const double ct = std::cos(theta * M_PI / 180.0);
            const double sp = std::sin(phi * M_PI / 180.0);
            const double cp = std::cos(phi * M_PI / 180.0);
            model.mean_shape[3 * i] = ax * st * sp;
            model.mean_shape[3 * i + 1] = by * ct;
            model.mean_shape[3 * i + 2] = cz * st * cp;
            model.uv[i] = Vec2(static_cast<double>(c) / (cols - 1),
                               static_cast<double>(r) / (rows - 1));
            synth.mirror_map[i] = r * cols + (cols - 1 - c);

            const double aphi = std::abs(phi);
            if (theta >= 55.0 && theta <= 78.0 && aphi >= 12.0 && aphi <= 50.0)
                synth.regions[i] = SyntheticModel::kEyes;
            else if (theta > 78.0 && theta <= 108.0 && aphi < 12.0)
                synth.regions[i] = SyntheticModel::kNose;
            else if (theta > 108.0 && theta <= 132.0 && aphi < 32.0)
                synth.regions[i] = SyntheticModel::kMouth;
            if (aphi >= 72.0 && theta >= 40.0 && theta <= 150.0)
                synth.contour_band.push_back(i);
        }

    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c)
        {
            const int v00 = r * cols + c;
            const int v10 = (r + 1) * cols + c;
            const int v01 = r * cols + (c + 1);
            const int v11 = (r + 1) * cols + (c + 1);
            model.triangles.push_back({v00, v10, v01});
            model.triangles.push_back({v10, v11, v01});
        }

    // Landmark rings: region vertices adjacent (on the grid) to a different region.
    auto region_at = [&](int r, int c) { return synth.regions[r * cols + c]; };
    std::vector<int> eye_ring, mouth_ring;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
        {
            const int reg = region_at(r, c);
            if (reg != SyntheticModel::kEyes && reg != SyntheticModel::kMouth)
                continue;
            bool on_ring = false;
            for (const auto& [dr, dc] : std::vector<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
            {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols || region_at(rr, cc) != reg)
                {
                    on_ring = true;
                    break;
                }
            }
            if (on_ring)
                (reg == SyntheticModel::kEyes ? eye_ring : mouth_ring).push_back(r * cols + c);
        }
    synth.eye_landmarks = std::move(eye_ring);
    synth.mouth_landmarks = std::move(mouth_ring);

    // Eye centers: nearest grid vertices to the nominal pupil angles.
    auto nearest_vertex = [&](double theta, double phi) {
        int best = 0;
        double best_d = 1e300;
        for (int i = 0; i < n; ++i)
        {
            const double d = (thetas[i] - theta) * (thetas[i] - theta) +
                             (phis[i] - phi) * (phis[i] - phi);
            if (d < best_d)
            {
                best_d = d;
                best = i;
            }
        }
        return best;
    };
    synth.left_eye_center = nearest_vertex(66.0, -31.0);
    synth.right_eye_center = nearest_vertex(66.0, 31.0);

    Rng rng(options.seed);
    const int k_shape = options.id_dims + options.exp_dims;
    Eigen::MatrixXd shape_cols(3 * n, k_shape);
    for (int k = 0; k < k_shape; ++k)
        shape_cols.col(k) = smooth_grid_field(rng, rows, cols, 1.0);
    orthonormalize_columns(shape_cols);
    model.id_basis = shape_cols.leftCols(options.id_dims);
    model.exp_basis = shape_cols.rightCols(options.exp_dims);

    model.mean_texture.resize(3 * n);
    const Eigen::VectorXd tex_variation = smooth_grid_field(rng, rows, cols, 0.03);
    const Vec3 skin(0.78, 0.62, 0.55);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < 3; ++d)
            model.mean_texture[3 * i + d] =
                std::clamp(skin[d] + tex_variation[3 * i + d], 0.05, 0.95);
    Eigen::MatrixXd tex_cols(3 * n, options.tex_dims);
    for (int k = 0; k < options.tex_dims; ++k)
        tex_cols.col(k) = smooth_grid_field(rng, rows, cols, 1.0);
    orthonormalize_columns(tex_cols);
    model.tex_basis = tex_cols;

    return synth;
}

} // namespace facekit
