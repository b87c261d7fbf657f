/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/pipeline.cpp
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
#include "facekit/pipeline.hpp"

#include "facekit/augmentation.hpp"
#include "facekit/fixtures.hpp"
#include "facekit/losses.hpp"
#include "facekit/multiview.hpp"
#include "facekit/obj_io.hpp"
#include "facekit/png_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace facekit {

namespace fs = std::filesystem;
using nlohmann::json;

void TemplateAnnotations::save(const std::string& path) const
{
    json j;
    j["regions"] = regions;
    j["contour_band"] = contour_band;
    j["left_eye"] = left_eye;
    j["right_eye"] = right_eye;
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("TemplateAnnotations::save: cannot open " + path);
    out << j.dump(2) << "\n";
}

TemplateAnnotations TemplateAnnotations::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("TemplateAnnotations::load: cannot open " + path);
    json j;
    in >> j;
    TemplateAnnotations a;
    a.regions = j.at("regions").get<std::vector<int>>();
    a.contour_band = j.at("contour_band").get<std::vector<int>>();
    a.left_eye = j.at("left_eye").get<int>();
    a.right_eye = j.at("right_eye").get<int>();
    return a;
}

namespace {

class StageTimer
{
public:
    StageTimer(const std::string& sample, const std::string& stage)
        : sample_(sample), stage_(stage), start_(std::chrono::steady_clock::now())
    {
    }
    ~StageTimer()
    {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start_)
                            .count();
        std::cout << "stage sample=" << sample_ << " stage=" << stage_ << " ms=" << ms << "\n";
    }

private:
    std::string sample_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

UvDisplacementMap grid_displacement(const Mesh& template_mesh, const std::vector<Vec3>& delta,
                                    int resolution)
{
    Mesh chart;
    chart.vertices.resize(template_mesh.vertices.size());
    chart.triangles = template_mesh.triangles;
    for (size_t i = 0; i < template_mesh.vertices.size(); ++i)
        chart.vertices[i] = Vec3(template_mesh.uv[i].x() * (resolution - 1),
                                 template_mesh.uv[i].y() * (resolution - 1), 0.0);
    const RenderBuffer buf =
        rasterize(chart, CameraPose{}, delta, resolution, resolution);
    UvDisplacementMap map(resolution, resolution);
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x)
            if (buf.is_foreground(x, y))
                map.at(x, y) = buf.color.at(x, y);
    return map;
}

CameraPose compose_view(const CameraPose& base, const Vec3& center, double pitch, double yaw)
{
    const Mat3 rv = rotation_pitch_yaw(pitch, yaw);
    CameraPose out;
    out.f = base.f;
    out.R = rv * base.R;
    out.t3d = rv * (base.t3d - center) + center;
    return out;
}

std::string angle_tag(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+g", value);
    return buf;
}

struct SampleContext
{
    std::string name;
    RGBDFrame frame;
    LandmarkSet landmarks;
    ShapeParams fit_params;
    CameraPose fit_pose;
};

void process_sample(const RunConfig& config, const MorphableModel& model,
                    const TemplateAnnotations& annotations, const std::vector<Mesh>& donors,
                    const SampleContext& ctx, const std::string& out_dir, json& artifacts)
{
    fs::create_directories(out_dir);
    auto emit = [&](const std::string& rel) {
        artifacts.push_back({{"path", ctx.name + "/" + rel},
                             {"hash", hash_file_hex(out_dir + "/" + rel)}});
    };

    const Mesh coarse = evaluate_shape(model, ctx.fit_params);
    const Mesh coarse_posed = rigid_project(coarse, ctx.fit_pose);
    const int width = ctx.frame.width();
    const int height = ctx.frame.height();

    // Registration.
    NicpResult nicp;
    {
        StageTimer timer(ctx.name, "register");
        NicpOptions options;
        options.stiffness_schedule = config.stiffness_schedule;
        options.inner_rounds = config.inner_rounds;
        options.w_data = config.w_data;
        options.w_edge = config.w_edge;
        options.w_cont = config.w_cont;
        options.gate_distance = config.gate_distance;
        options.gate_normal_deg = config.gate_normal_deg;
        options.contour_band = annotations.contour_band;
        nicp = nonrigid_icp(coarse_posed, ctx.frame, ctx.landmarks, options);
        write_obj(nicp.registered, out_dir + "/registered.obj");
        json report;
        report["iterations"] = json::array();
        for (const auto& it : nicp.trace)
            report["iterations"].push_back({{"stiffness", it.stiffness},
                                            {"round", it.round},
                                            {"e_data", it.e_data},
                                            {"e_smooth", it.e_smooth},
                                            {"e_edge", it.e_edge},
                                            {"e_cont", it.e_cont},
                                            {"e_total", it.e_total},
                                            {"active_pairs", it.active_pairs},
                                            {"gating_changed", it.gating_changed}});
        std::ofstream rep(out_dir + "/report.json");
        rep << report.dump(2) << "\n";
        emit("registered.obj");
        emit("report.json");
    }

    // Rigid disentanglement and the supervision target.
    Mesh gt_shape;
    {
        StageTimer timer(ctx.name, "disentangle");
        auto [shape, pose] = disentangle_rigid(nicp.registered, coarse);
        gt_shape = std::move(shape);
        write_obj(gt_shape, out_dir + "/gt_shape.obj");
        emit("gt_shape.obj");
        const std::vector<Vec3> delta = shape_residual(gt_shape, model, ctx.fit_params);
        if (!model.uv.empty())
        {
            Mesh with_uv = gt_shape;
            with_uv.uv = model.uv;
            grid_displacement(with_uv, delta, 128).save(out_dir + "/gt_delta.uvdm");
            emit("gt_delta.uvdm");
        }
        save_fit(ctx.fit_params, pose, out_dir + "/fit.json");
        emit("fit.json");
    }

    // Pose augmentation.
    {
        StageTimer timer(ctx.name, "augment-pose");
        const Image<double> dense =
            complete_depth(ctx.frame, nicp.registered, config.anchor_spacing,
                           config.depth_smooth_weight);
        TextureFitOptions tex_options;
        tex_options.iterations = config.texture_fit_iterations;
        tex_options.step = config.texture_fit_step;
        const TextureParams tex =
            fit_texture(ctx.frame.color, nicp.registered, model, tex_options);
        Vec3 center = Vec3::Zero();
        for (const Vec3& v : nicp.registered.vertices)
            center += v;
        center /= nicp.registered.vertex_count();

        RotateRenderOptions rr;
        rr.occlusion_threshold = config.occlusion_threshold;
        std::vector<std::pair<double, double>> poses;
        for (const double yaw : config.yaw_schedule)
            poses.emplace_back(0.0, yaw);
        for (const double pitch : config.pitch_schedule)
            poses.emplace_back(pitch, 0.0);
        for (const auto& [pitch, yaw] : poses)
        {
            const CameraPose view = make_view_pose(center, pitch, yaw);
            const RotatedRender render =
                rotate_and_render(ctx.frame, nicp.registered, dense, view, tex, model, rr);
            const std::string rel =
                "aug_pose_" + angle_tag(pitch) + "_" + angle_tag(yaw);
            fs::create_directories(out_dir + "/" + rel);
            write_png_rgb(render.color, out_dir + "/" + rel + "/image.png");
            emit(rel + "/image.png");
            save_fit(ctx.fit_params, compose_view(ctx.fit_pose, center, pitch, yaw),
                     out_dir + "/" + rel + "/fit.json");
            emit(rel + "/fit.json");
            json prov;
            prov["source"] = ctx.name;
            prov["kind"] = "pose";
            prov["pitch"] = pitch;
            prov["yaw"] = yaw;
            std::ofstream pv(out_dir + "/" + rel + "/provenance.json");
            pv << prov.dump(2) << "\n";
            emit(rel + "/provenance.json");
        }
    }

    // Shape transformation.
    if (!donors.empty())
    {
        StageTimer timer(ctx.name, "augment-shape");
        TextureFitOptions tex_options;
        tex_options.iterations = config.texture_fit_iterations;
        tex_options.step = config.texture_fit_step;
        const TextureParams tex =
            fit_texture(ctx.frame.color, nicp.registered, model, tex_options);

        // Image mesh of the source; its anchors are the warp unknowns, with
        // depths from the completion solve so the lattice sits in the scene.
        const ImageMesh source_im =
            build_image_mesh(ctx.frame.color, nicp.registered, config.anchor_spacing);
        AnchorGraph graph = build_anchor_graph(width, height, nicp.registered,
                                               config.anchor_spacing, &ctx.frame);
        const std::vector<int>& ring_vids = graph.contour_vids;
        {
            AnchorGraph solve_graph = graph;
            for (int i = 0; i < solve_graph.contour_count; ++i)
            {
                solve_graph.anchors[i].valid = true;
                solve_graph.anchors[i].depth = nicp.registered.vertices[ring_vids[i]].z();
            }
            const std::vector<double> depths =
                solve_anchor_depths(solve_graph, config.depth_smooth_weight);
            for (size_t i = 0; i < graph.anchors.size(); ++i)
                graph.anchors[i].depth = depths[i];
        }

        double mean_edge = 0.0;
        {
            const auto edges = mesh_edges(gt_shape);
            for (const auto& e : edges)
                mean_edge += (gt_shape.vertices[e[0]] - gt_shape.vertices[e[1]]).norm();
            mean_edge /= static_cast<double>(edges.size());
        }
        const int band_hops =
            std::max(1, static_cast<int>(std::lround(config.blend_band_mm / mean_edge)));

        std::vector<Vec3> image_colors(nicp.registered.vertex_count());
        for (int i = 0; i < nicp.registered.vertex_count(); ++i)
            image_colors[i] = sample_bilinear(ctx.frame.color,
                                              nicp.registered.vertices[i].x(),
                                              nicp.registered.vertices[i].y());

        for (int k = 0; k < config.shape_transform_count; ++k)
        {
            DonorParts parts;
            parts.cheek = donors[k % donors.size()];
            parts.eyes = donors[(k + 1) % donors.size()];
            parts.nose = donors[(k + 2) % donors.size()];
            parts.mouth = donors[(k + 3) % donors.size()];
            const Mesh target = fuse_target_shape(parts, annotations.regions, band_hops);
            const Mesh target_posed = rigid_project(target, ctx.fit_pose);

            std::vector<Vec2> source_contour, target_contour;
            for (const int vid : ring_vids)
            {
                source_contour.push_back(nicp.registered.vertices[vid].head<2>());
                target_contour.push_back(target_posed.vertices[vid].head<2>());
            }
            const AnchorGraph warped =
                warp_background_anchors(graph, source_contour, target_contour);

            // Composite: the new face, shading re-lit for its normals, plus
            // the warped anchors carrying their source texture.
            Mesh composite = source_im.mesh;
            for (int i = 0; i < source_im.face_vertex_count; ++i)
                composite.vertices[i] = target_posed.vertices[i];
            const std::vector<Vec3> shaded =
                adjust_shading(image_colors, nicp.registered, target_posed, tex);
            for (int i = 0; i < source_im.face_vertex_count; ++i)
                composite.colors[i] = shaded[i];
            for (size_t j = 0; j + graph.contour_count < warped.anchors.size(); ++j)
            {
                const auto& anchor = warped.anchors[graph.contour_count + j];
                Vec3& v = composite.vertices[source_im.face_vertex_count + j];
                v.x() = anchor.xy.x();
                v.y() = anchor.xy.y();
                v.z() = graph.anchors[graph.contour_count + j].depth;
            }

            const std::string rel = "aug_shape_" + std::to_string(k);
            fs::create_directories(out_dir + "/" + rel);
            const RenderBuffer buf = rasterize(composite, CameraPose{}, width, height);
            write_png_rgb(buf.color, out_dir + "/" + rel + "/image.png");
            emit(rel + "/image.png");
            write_obj(target, out_dir + "/" + rel + "/gt_shape.obj");
            emit(rel + "/gt_shape.obj");

            // Coarse fit of the fused target: projection onto the bases.
            Eigen::VectorXd flat(3 * target.vertex_count());
            for (int i = 0; i < target.vertex_count(); ++i)
                flat.segment<3>(3 * i) = target.vertices[i];
            ShapeParams target_fit;
            target_fit.alpha_id = model.id_basis.transpose() * (flat - model.mean_shape);
            target_fit.alpha_exp = model.exp_basis.transpose() * (flat - model.mean_shape);
            save_fit(target_fit, ctx.fit_pose, out_dir + "/" + rel + "/fit.json");
            emit(rel + "/fit.json");

            json prov;
            prov["source"] = ctx.name;
            prov["kind"] = "shape";
            prov["donors"] = {static_cast<int>(k % donors.size()),
                              static_cast<int>((k + 1) % donors.size()),
                              static_cast<int>((k + 2) % donors.size()),
                              static_cast<int>((k + 3) % donors.size())};
            std::ofstream pv(out_dir + "/" + rel + "/provenance.json");
            pv << prov.dump(2) << "\n";
            emit(rel + "/provenance.json");
        }
    }

    // View synthesis.
    {
        StageTimer timer(ctx.name, "synth-views");
        const ImageMesh im =
            build_image_mesh(ctx.frame.color, coarse_posed, config.anchor_spacing);
        const ImageMesh flipped = mirror_register(im);
        const Vec3 center = face_center(im);
        fs::create_directories(out_dir + "/views");
        for (const auto& [pitch, yaw] : synthesis_view_angles())
        {
            const ViewSynthesis vs =
                synthesize_view(im, flipped, make_view_pose(center, pitch, yaw));
            const std::string rel =
                "views/view_" + angle_tag(pitch) + "_" + angle_tag(yaw);
            write_png_rgba(vs.color, vs.alpha, out_dir + "/" + rel + ".png");
            emit(rel + ".png");
            // Weight maps: lambda in red, lambda_flip in green.
            ImageRGB lambda_img(vs.lambda.width(), vs.lambda.height(), Vec3::Zero());
            for (int y = 0; y < lambda_img.height(); ++y)
                for (int x = 0; x < lambda_img.width(); ++x)
                    lambda_img.at(x, y) =
                        Vec3(vs.lambda.at(x, y), vs.lambda_flip.at(x, y), 0.0);
            write_png_rgb(lambda_img, out_dir + "/" + rel + "_lambda.png");
            emit(rel + "_lambda.png");
        }
    }

    // Metrics of the initial fit against the constructed ground truth.
    {
        StageTimer timer(ctx.name, "eval");
        const Mesh scan = make_scan_mesh(ctx.frame);
        const CorrespondenceSet corr =
            build_correspondence(coarse_posed, scan, nicp.registered, config.spatial_tol_mm,
                                 config.normal_tol_deg);
        const double d = (gt_shape.vertices[annotations.left_eye] -
                          gt_shape.vertices[annotations.right_eye])
                             .norm();
        json metrics;
        metrics["interocular"] = d;
        metrics["spatial_tol_mm"] = config.spatial_tol_mm;
        metrics["normal_tol_deg"] = config.normal_tol_deg;
        metrics["reliable_pairs"] = corr.reliable_count();
        metrics["nme"] = metric_nme(coarse_posed, scan, corr, d);
        metrics["dace"] = metric_dace(coarse_posed, scan, corr, d);
        std::ofstream mm(out_dir + "/metrics.json");
        mm << metrics.dump(2) << "\n";
        emit("metrics.json");
    }
}

} // namespace

PipelineResult run_pipeline(const RunConfig& config)
{
    PipelineResult result;
    fs::create_directories(config.output_dir);

    const MorphableModel model = MorphableModel::load(config.model_path);
    const TemplateAnnotations annotations = TemplateAnnotations::load(
        (fs::path(config.model_path).parent_path() / "annotations.json").string());

    std::vector<Mesh> donors;
    for (int d = 0;; ++d)
    {
        const fs::path path = fs::path(config.input_dir) / ("donor_" + std::to_string(d) + ".obj");
        if (!fs::exists(path))
            break;
        donors.push_back(read_obj(path.string()));
    }

    json manifest;
    manifest["seed"] = config.seed;
    manifest["artifacts"] = json::array();
    json& artifacts = manifest["artifacts"];

    std::vector<std::string> sample_names;
    for (const auto& entry : fs::directory_iterator(config.input_dir))
        if (entry.is_directory())
            sample_names.push_back(entry.path().filename().string());
    std::sort(sample_names.begin(), sample_names.end());

    for (const std::string& name : sample_names)
    {
        const std::string in_dir = (fs::path(config.input_dir) / name).string();
        try
        {
            SampleContext ctx;
            ctx.name = name;
            ctx.frame = load_rgbd(in_dir);
            ctx.landmarks = load_landmarks(in_dir + "/landmarks.json");
            std::tie(ctx.fit_params, ctx.fit_pose) = load_fit(in_dir + "/fit.json");
            process_sample(config, model, annotations, donors, ctx,
                           (fs::path(config.output_dir) / name).string(), artifacts);
            ++result.samples_ok;
        }
        catch (const std::exception& e)
        {
            std::cerr << "sample " << name << " failed: " << e.what() << "\n";
            ++result.samples_failed;
        }
    }

    result.manifest_path = (fs::path(config.output_dir) / "manifest.json").string();
    std::ofstream out(result.manifest_path);
    out << manifest.dump(2) << "\n";
    result.exit_code = result.samples_failed > 0 ? 1 : 0;
    return result;
}

} // namespace facekit
