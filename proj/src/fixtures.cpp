/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/fixtures.cpp
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

#include "facekit/obj_io.hpp"
#include "facekit/pipeline.hpp"
#include "facekit/png_io.hpp"
#include "facekit/rasterizer.hpp"
#include "facekit/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

namespace facekit {

Mesh make_icosphere(int subdivisions, double radius)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh mesh;
    mesh.vertices = {{-1, t, 0},  {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                     {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (Vec3& v : mesh.vertices)
        v.normalize();
    for (int s = 0; s < subdivisions; ++s)
    {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            const auto it = midpoint.find(key);
            if (it != midpoint.end())
                return it->second;
            const int idx = mesh.vertex_count();
            mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(mesh.triangles.size() * 4);
        for (const auto& tri : mesh.triangles)
        {
            const int ab = mid(tri[0], tri[1]);
            const int bc = mid(tri[1], tri[2]);
            const int ca = mid(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        mesh.triangles = std::move(next);
    }
    for (Vec3& v : mesh.vertices)
        v *= radius;
    return mesh;
}

FixtureSample make_fixture_sample(const FixtureOptions& options)
{
    FixtureSample sample;
    SyntheticModelOptions model_options;
    model_options.seed = options.seed;
    model_options.vertex_target = options.vertex_target;
    sample.synth = synthesize_model(model_options);
    const MorphableModel& model = sample.synth.model;

    Rng rng(options.seed ^ 0x5eed5a3e11ULL);
    sample.gt_params.alpha_id.resize(model.id_basis.cols());
    sample.gt_params.alpha_exp.resize(model.exp_basis.cols());
    for (int i = 0; i < sample.gt_params.alpha_id.size(); ++i)
        sample.gt_params.alpha_id[i] = options.pca_magnitude * rng.normal();
    for (int i = 0; i < sample.gt_params.alpha_exp.size(); ++i)
        sample.gt_params.alpha_exp[i] = 0.3 * options.pca_magnitude * rng.normal();

    // Smooth off-model displacement field, rescaled to the requested mean
    // per-vertex magnitude. Mostly view-axis displacement: that is the
    // component a single depth view can actually observe.
    const int n = model.vertex_count();
    Eigen::VectorXd field =
        smooth_grid_field(rng, sample.synth.rows, sample.synth.cols, 1.0);
    for (int i = 0; i < n; ++i)
    {
        field[3 * i] *= 0.15;
        field[3 * i + 1] *= 0.15;
        // Fade the field out toward grazing angles: a frontal capture can
        // neither observe nor supervise displacement there.
        const double st = std::sin(sample.synth.theta_deg[i] * M_PI / 180.0);
        const double cp = std::cos(sample.synth.phi_deg[i] * M_PI / 180.0);
        double t = std::clamp((st * cp - 0.15) / 0.25, 0.0, 1.0);
        t = t * t * (3.0 - 2.0 * t);
        field.segment<3>(3 * i) *= t;
    }
    // Normalize over the supervisable region and keep peaks well inside the
    // correspondence gate; a displacement beyond the gate is unrecoverable
    // from a single view by construction.
    double mean_norm = 0.0;
    int mean_count = 0;
    double max_norm = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const double v = field.segment<3>(3 * i).norm();
        max_norm = std::max(max_norm, v);
        const double st = std::sin(sample.synth.theta_deg[i] * M_PI / 180.0);
        const double cp = std::cos(sample.synth.phi_deg[i] * M_PI / 180.0);
        if (st * cp > 0.4)
        {
            mean_norm += v;
            ++mean_count;
        }
    }
    mean_norm /= std::max(1, mean_count);
    if (options.offset_magnitude > 0.0 && mean_norm > 0.0)
        field *= std::min(options.offset_magnitude / mean_norm,
                          2.4 * options.offset_magnitude / std::max(max_norm, 1e-9));
    else
        field.setZero();
    sample.gt_offset.resize(n);
    for (int i = 0; i < n; ++i)
        sample.gt_offset[i] = field.segment<3>(3 * i);

    if (options.eye_shift_px != 0.0)
    {
        const double sigma = 10.0; // degrees
        for (int i = 0; i < n; ++i)
        {
            double best = std::numeric_limits<double>::infinity();
            for (const int eye : {sample.synth.left_eye_center, sample.synth.right_eye_center})
            {
                const double dt = sample.synth.theta_deg[i] - sample.synth.theta_deg[eye];
                const double dp = sample.synth.phi_deg[i] - sample.synth.phi_deg[eye];
                best = std::min(best, dt * dt + dp * dp);
            }
            sample.gt_offset[i].x() +=
                options.eye_shift_px * std::exp(-best / (2.0 * sigma * sigma));
        }
    }

    Mesh gt = evaluate_shape(model, sample.gt_params);
    for (int i = 0; i < n; ++i)
        gt.vertices[i] += sample.gt_offset[i];

    // One pixel per millimetre; depth shifted positive.
    const int s = options.image_size;
    Vec3 lo = gt.vertices[0], hi = gt.vertices[0];
    for (const Vec3& v : gt.vertices)
    {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    sample.pose.f = 1.0;
    sample.pose.R = Mat3::Identity();
    sample.pose.t3d = Vec3(0.5 * s, 0.5 * s, 500.0) - 0.5 * (lo + hi);
    sample.gt_image_mesh = rigid_project(gt, sample.pose);

    sample.gt_texture.beta = Eigen::VectorXd::Zero(model.tex_basis.cols());
    for (int i = 0; i < sample.gt_texture.beta.size(); ++i)
        sample.gt_texture.beta[i] = 2.0 * rng.normal();
    sample.gt_texture.phong.amb = Vec3(0.45, 0.45, 0.45);
    sample.gt_texture.phong.dir = Vec3(0.5, 0.5, 0.5);
    sample.gt_texture.phong.l = Vec3(0.15, -0.1, 1.0).normalized();
    sample.gt_texture.phong.ve = Vec3(0, 0, 1);
    sample.gt_texture.phong.k_s = 0.0;
    sample.gt_texture.phong.nu = 2.0;

    const std::vector<Vec3> albedo = evaluate_texture(model, sample.gt_texture.beta);
    const std::vector<Vec3> shaded =
        phong_shade(sample.gt_image_mesh, albedo, sample.gt_texture.phong);
    const RenderBuffer buf = rasterize(sample.gt_image_mesh, CameraPose{}, shaded, s, s);
    sample.frame.color = buf.color;
    sample.frame.depth = Image<double>(s, s, 0.0);
    sample.frame.valid = Image<uint8_t>(s, s, 0);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
            if (buf.is_foreground(x, y))
            {
                sample.frame.depth.at(x, y) = buf.depth.at(x, y);
                sample.frame.valid.at(x, y) = 1;
            }

    for (const int vid : sample.synth.eye_landmarks)
        sample.landmarks.edge_points.push_back(
            {sample.gt_image_mesh.vertices[vid].head<2>(), vid});
    for (const int vid : sample.synth.mouth_landmarks)
        sample.landmarks.edge_points.push_back(
            {sample.gt_image_mesh.vertices[vid].head<2>(), vid});

    // Contour polyline: the ground truth's own silhouette, left side top to
    // bottom then right side bottom to top.
    const std::vector<int> silhouette =
        select_contour_vertices(sample.gt_image_mesh, CameraPose{}, sample.synth.contour_band);
    const double cx = 0.5 * s;
    std::vector<Vec2> left, right;
    for (const int vid : silhouette)
    {
        const Vec2 p = sample.gt_image_mesh.vertices[vid].head<2>();
        (p.x() < cx ? left : right).push_back(p);
    }
    auto by_y = [](const Vec2& a, const Vec2& b) { return a.y() < b.y(); };
    std::sort(left.begin(), left.end(), by_y);
    std::sort(right.begin(), right.end(), by_y);
    sample.landmarks.contour = left;
    for (auto it = right.rbegin(); it != right.rend(); ++it)
        sample.landmarks.contour.push_back(*it);

    return sample;
}

Mesh make_scan_mesh(const RGBDFrame& frame)
{
    const int w = frame.width(), h = frame.height();
    Mesh scan;
    Image<int> index(w, h, -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (frame.valid.at(x, y))
            {
                index.at(x, y) = scan.vertex_count();
                scan.vertices.emplace_back(x, y, frame.depth.at(x, y));
            }
    if (scan.vertices.empty())
        throw std::runtime_error("make_scan_mesh: frame has no valid depth");
    for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x + 1 < w; ++x)
        {
            const int v00 = index.at(x, y), v01 = index.at(x + 1, y);
            const int v10 = index.at(x, y + 1), v11 = index.at(x + 1, y + 1);
            if (v00 >= 0 && v10 >= 0 && v01 >= 0)
                scan.triangles.push_back({v00, v10, v01});
            if (v10 >= 0 && v11 >= 0 && v01 >= 0)
                scan.triangles.push_back({v10, v11, v01});
        }
    return scan;
}

namespace {

constexpr double kDepthScale = 1000.0; // sidecar-normalized depth span guard

} // namespace

void save_rgbd(const RGBDFrame& frame, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_png_rgb(frame.color, dir + "/image.png");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int y = 0; y < frame.height(); ++y)
        for (int x = 0; x < frame.width(); ++x)
            if (frame.valid.at(x, y))
            {
                lo = std::min(lo, frame.depth.at(x, y));
                hi = std::max(hi, frame.depth.at(x, y));
            }
    if (!std::isfinite(lo))
    {
        lo = 0.0;
        hi = kDepthScale;
    }
    const double span = hi > lo ? hi - lo : 1.0;
    Image<double> encoded(frame.width(), frame.height(), 0.0);
    for (int y = 0; y < frame.height(); ++y)
        for (int x = 0; x < frame.width(); ++x)
            if (frame.valid.at(x, y))
                encoded.at(x, y) =
                    (1.0 + 65534.0 * (frame.depth.at(x, y) - lo) / span) / 65535.0;
    write_png_gray16(encoded, dir + "/depth.png");
    nlohmann::json sidecar;
    sidecar["depth_min"] = lo;
    sidecar["depth_max"] = hi;
    sidecar["invalid"] = 0;
    std::ofstream out(dir + "/depth.json");
    out << sidecar.dump(2) << "\n";
}

RGBDFrame load_rgbd(const std::string& dir)
{
    RGBDFrame frame;
    frame.color = read_png_rgb(dir + "/image.png");
    const Image<double> encoded = read_png_gray16(dir + "/depth.png");
    std::ifstream in(dir + "/depth.json");
    if (!in)
        throw std::runtime_error("load_rgbd: missing sidecar " + dir + "/depth.json");
    nlohmann::json sidecar;
    in >> sidecar;
    const double lo = sidecar.at("depth_min").get<double>();
    const double hi = sidecar.at("depth_max").get<double>();
    frame.depth = Image<double>(encoded.width(), encoded.height(), 0.0);
    frame.valid = Image<uint8_t>(encoded.width(), encoded.height(), 0);
    for (int y = 0; y < encoded.height(); ++y)
        for (int x = 0; x < encoded.width(); ++x)
        {
            const double px = encoded.at(x, y) * 65535.0;
            if (px < 0.5)
                continue;
            frame.valid.at(x, y) = 1;
            frame.depth.at(x, y) = lo + (px - 1.0) / 65534.0 * (hi - lo);
        }
    return frame;
}

void save_landmarks(const LandmarkSet& landmarks, const std::string& path)
{
    nlohmann::json j;
    j["edge"] = nlohmann::json::array();
    for (const auto& lm : landmarks.edge_points)
        j["edge"].push_back({{"xy", {lm.xy.x(), lm.xy.y()}}, {"vid", lm.vertex_id}});
    j["contour"] = nlohmann::json::array();
    for (const Vec2& p : landmarks.contour)
        j["contour"].push_back({p.x(), p.y()});
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_landmarks: cannot open " + path);
    out << j.dump(2) << "\n";
}

LandmarkSet load_landmarks(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_landmarks: cannot open " + path);
    nlohmann::json j;
    in >> j;
    LandmarkSet landmarks;
    for (const auto& e : j.at("edge"))
        landmarks.edge_points.push_back(
            {Vec2(e.at("xy")[0].get<double>(), e.at("xy")[1].get<double>()),
             e.at("vid").get<int>()});
    for (const auto& p : j.at("contour"))
        landmarks.contour.emplace_back(p[0].get<double>(), p[1].get<double>());
    return landmarks;
}

void save_fit(const ShapeParams& params, const CameraPose& pose, const std::string& path)
{
    nlohmann::json j;
    j["alpha_id"] = std::vector<double>(params.alpha_id.data(),
                                        params.alpha_id.data() + params.alpha_id.size());
    j["alpha_exp"] = std::vector<double>(params.alpha_exp.data(),
                                         params.alpha_exp.data() + params.alpha_exp.size());
    j["f"] = pose.f;
    std::vector<double> r;
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
            r.push_back(pose.R(row, col));
    j["R"] = r;
    j["t3d"] = {pose.t3d.x(), pose.t3d.y(), pose.t3d.z()};
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_fit: cannot open " + path);
    out << j.dump(2) << "\n";
}

std::pair<ShapeParams, CameraPose> load_fit(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_fit: cannot open " + path);
    nlohmann::json j;
    in >> j;
    ShapeParams params;
    const auto aid = j.at("alpha_id").get<std::vector<double>>();
    const auto aexp = j.at("alpha_exp").get<std::vector<double>>();
    params.alpha_id = Eigen::Map<const Eigen::VectorXd>(aid.data(), aid.size());
    params.alpha_exp = Eigen::Map<const Eigen::VectorXd>(aexp.data(), aexp.size());
    CameraPose pose;
    pose.f = j.at("f").get<double>();
    const auto r = j.at("R").get<std::vector<double>>();
    if (r.size() != 9)
        throw std::runtime_error("load_fit: R must have 9 row-major entries");
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
            pose.R(row, col) = r[3 * row + col];
    const auto t = j.at("t3d").get<std::vector<double>>();
    pose.t3d = Vec3(t.at(0), t.at(1), t.at(2));
    return {params, pose};
}

std::string hash_file_hex(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("hash_file_hex: cannot open " + path);
    uint64_t hash = 1469598103934665603ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    {
        for (std::streamsize i = 0; i < in.gcount(); ++i)
        {
            hash ^= static_cast<uint8_t>(buf[i]);
            hash *= 1099511628211ULL;
        }
        if (!in)
            break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

std::vector<std::pair<std::string, std::string>> generate_fixtures(uint64_t seed,
                                                                   const std::string& out_dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    FixtureOptions options;
    options.seed = seed;
    const FixtureSample sample = make_fixture_sample(options);

    std::vector<std::pair<std::string, std::string>> manifest;
    auto record = [&](const std::string& rel) {
        manifest.emplace_back(rel, hash_file_hex(out_dir + "/" + rel));
    };

    sample.synth.model.save(out_dir + "/model.mm3d");
    record("model.mm3d");
    TemplateAnnotations annotations;
    annotations.regions = sample.synth.regions;
    annotations.contour_band = sample.synth.contour_band;
    annotations.left_eye = sample.synth.left_eye_center;
    annotations.right_eye = sample.synth.right_eye_center;
    annotations.save(out_dir + "/annotations.json");
    record("annotations.json");

    const std::string sample_dir = out_dir + "/sample_000";
    save_rgbd(sample.frame, sample_dir);
    record("sample_000/image.png");
    record("sample_000/depth.png");
    record("sample_000/depth.json");
    save_landmarks(sample.landmarks, sample_dir + "/landmarks.json");
    record("sample_000/landmarks.json");
    save_fit(sample.gt_params, sample.pose, sample_dir + "/fit.json");
    record("sample_000/fit.json");

    Rng donor_rng(seed ^ 0xd0170f5ULL);
    for (int d = 0; d < 4; ++d)
    {
        ShapeParams donor_params;
        donor_params.alpha_id.resize(sample.synth.model.id_basis.cols());
        donor_params.alpha_exp.resize(sample.synth.model.exp_basis.cols());
        for (int i = 0; i < donor_params.alpha_id.size(); ++i)
            donor_params.alpha_id[i] = 40.0 * donor_rng.normal();
        for (int i = 0; i < donor_params.alpha_exp.size(); ++i)
            donor_params.alpha_exp[i] = 12.0 * donor_rng.normal();
        const Mesh donor = evaluate_shape(sample.synth.model, donor_params);
        const std::string rel = "donor_" + std::to_string(d) + ".obj";
        write_obj(donor, out_dir + "/" + rel);
        record(rel);
    }
    return manifest;
}

} // namespace facekit
