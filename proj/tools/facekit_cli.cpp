/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: tools/facekit_cli.cpp
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
#include "facekit/augmentation.hpp"
#include "facekit/config.hpp"
#include "facekit/fixtures.hpp"
#include "facekit/losses.hpp"
#include "facekit/multiview.hpp"
#include "facekit/obj_io.hpp"
#include "facekit/pipeline.hpp"
#include "facekit/png_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace facekit;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 partial/runtime failure, 2 configuration error.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

RunConfig load_config_or_default(const std::string& path)
{
    if (path.empty())
        return RunConfig{};
    return RunConfig::load(path);
}

int cmd_model_synth(uint64_t seed, int vertices, int id_dims, const std::string& out)
{
    SyntheticModelOptions options;
    options.seed = seed;
    options.vertex_target = vertices;
    options.id_dims = id_dims;
    const SyntheticModel synth = synthesize_model(options);
    synth.model.save(out);
    TemplateAnnotations annotations;
    annotations.regions = synth.regions;
    annotations.contour_band = synth.contour_band;
    annotations.left_eye = synth.left_eye_center;
    annotations.right_eye = synth.right_eye_center;
    annotations.save((fs::path(out).parent_path() / "annotations.json").string());
    std::cout << "model: " << synth.model.vertex_count() << " vertices, "
              << synth.model.id_basis.cols() << " id axes -> " << out << "\n";
    return kOk;
}

int cmd_register(const std::string& template_path, const std::string& rgbd_dir,
                 const std::string& landmarks_path, const std::string& out_path,
                 const std::string& report_path, const RunConfig& config)
{
    const Mesh template_mesh = read_obj(template_path);
    const RGBDFrame frame = load_rgbd(rgbd_dir);
    const LandmarkSet landmarks = load_landmarks(landmarks_path);
    NicpOptions options;
    options.stiffness_schedule = config.stiffness_schedule;
    options.inner_rounds = config.inner_rounds;
    options.w_data = config.w_data;
    options.w_edge = config.w_edge;
    options.w_cont = config.w_cont;
    options.gate_distance = config.gate_distance;
    options.gate_normal_deg = config.gate_normal_deg;
    const NicpResult result = nonrigid_icp(template_mesh, frame, landmarks, options);
    write_obj(result.registered, out_path);
    if (!report_path.empty())
    {
        json report;
        report["iterations"] = json::array();
        for (const auto& it : result.trace)
            report["iterations"].push_back({{"stiffness", it.stiffness},
                                            {"round", it.round},
                                            {"e_data", it.e_data},
                                            {"e_smooth", it.e_smooth},
                                            {"e_edge", it.e_edge},
                                            {"e_cont", it.e_cont},
                                            {"e_total", it.e_total},
                                            {"active_pairs", it.active_pairs},
                                            {"gating_changed", it.gating_changed}});
        std::ofstream out(report_path);
        out << report.dump(2) << "\n";
    }
    std::cout << "registered -> " << out_path << "\n";
    return kOk;
}

int cmd_synth_views(const std::string& image_path, const std::string& fit_path,
                    const std::string& model_path, const std::string& out_dir,
                    int anchor_spacing)
{
    const ImageRGB image = read_png_rgb(image_path);
    const auto [params, pose] = load_fit(fit_path);
    const MorphableModel model = MorphableModel::load(model_path);
    const Mesh fitted = rigid_project(evaluate_shape(model, params), pose);
    const ImageMesh im = build_image_mesh(image, fitted, anchor_spacing);
    const ImageMesh flipped = mirror_register(im);
    const Vec3 center = face_center(im);
    fs::create_directories(out_dir);
    for (const auto& [pitch, yaw] : synthesis_view_angles())
    {
        const ViewSynthesis vs = synthesize_view(im, flipped, make_view_pose(center, pitch, yaw));
        char name[64];
        std::snprintf(name, sizeof(name), "view_%+g_%+g", pitch, yaw);
        write_png_rgba(vs.color, vs.alpha, out_dir + "/" + std::string(name) + ".png");
        ImageRGB lambda_img(vs.lambda.width(), vs.lambda.height(), Vec3::Zero());
        for (int y = 0; y < lambda_img.height(); ++y)
            for (int x = 0; x < lambda_img.width(); ++x)
                lambda_img.at(x, y) = Vec3(vs.lambda.at(x, y), vs.lambda_flip.at(x, y), 0.0);
        write_png_rgb(lambda_img, out_dir + "/" + std::string(name) + "_lambda.png");
    }
    std::cout << "views -> " << out_dir << "\n";
    return kOk;
}

int cmd_loss(const std::string& kind, const std::string& output_path,
             const std::string& gt_path, const std::string& out_path, int resolution)
{
    const Mesh output = read_obj(output_path);
    const Mesh gt = read_obj(gt_path);
    const std::vector<Mat3> views = psd_view_rotations();
    if (kind == "psd")
    {
        const PsdResult result = psd_distance(output, gt, views, resolution, resolution);
        std::cout << "psd = " << result.distance << "\n";
        return kOk;
    }
    const VertexWeightMap weights = vgd_weights(output, gt, views, resolution, resolution);
    save_weight_map(weights, out_path);
    std::cout << "vgd weights -> " << out_path << "\n";
    return kOk;
}

int cmd_eval(const std::string& recon_path, const std::string& gt_path,
             const std::string& scan_path, const std::string& registered_path,
             const std::string& metrics, double interocular, const std::string& report_path,
             const RunConfig& config)
{
    const Mesh recon = read_obj(recon_path);
    const Mesh gt = read_obj(gt_path);
    const Mesh scan = scan_path.empty() ? gt : read_obj(scan_path);
    const Mesh registered = registered_path.empty() ? gt : read_obj(registered_path);
    const CorrespondenceSet corr = build_correspondence(
        recon, scan, registered, config.spatial_tol_mm, config.normal_tol_deg);
    json report;
    report["spatial_tol_mm"] = config.spatial_tol_mm;
    report["normal_tol_deg"] = config.normal_tol_deg;
    report["reliable_pairs"] = corr.reliable_count();
    report["interocular"] = interocular;
    if (metrics.find("nme") != std::string::npos)
    {
        const double nme = metric_nme(recon, scan, corr, interocular);
        report["nme"] = nme;
        std::cout << "nme = " << nme << "\n";
    }
    if (metrics.find("dace") != std::string::npos)
    {
        const double dace = metric_dace(recon, scan, corr, interocular);
        report["dace"] = dace;
        std::cout << "dace = " << dace << "\n";
    }
    if (!report_path.empty())
    {
        std::ofstream out(report_path);
        out << report.dump(2) << "\n";
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"facekit: 3D face geometry and dataset-construction toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "TOML config file (defaults are built in)");

    // model synth
    auto* model = app.add_subcommand("model", "morphable-model utilities");
    auto* model_synth = model->add_subcommand("synth", "emit a deterministic synthetic model");
    uint64_t seed = 0;
    int vertices = 900, id_dims = 20;
    std::string model_out = "model.mm3d";
    model_synth->add_option("--seed", seed, "random seed");
    model_synth->add_option("--vertices", vertices, "approximate vertex count");
    model_synth->add_option("--id-dims", id_dims, "identity basis size");
    model_synth->add_option("--out", model_out, "output container path");

    // register
    auto* reg = app.add_subcommand("register", "non-rigid ICP registration to RGB-D");
    std::string reg_template, reg_rgbd, reg_landmarks, reg_out = "registered.obj", reg_report;
    reg->add_option("--template", reg_template, "template OBJ in the image frame")->required();
    reg->add_option("--rgbd", reg_rgbd, "sample directory (image/depth/sidecar)")->required();
    reg->add_option("--landmarks", reg_landmarks, "landmark JSON")->required();
    reg->add_option("--out", reg_out, "registered mesh output");
    reg->add_option("--report", reg_report, "per-iteration energy report JSON");

    // augment
    auto* augment = app.add_subcommand("augment", "pose and shape augmentation");
    auto* augment_pose = augment->add_subcommand("pose", "full-view augmentation");
    auto* augment_shape = augment->add_subcommand("shape", "shape transformation");
    std::string aug_in, aug_model, aug_donors;
    std::string yaws = "15,30,45,50", pitches = "15,-25";
    int shape_count = 4;
    augment_pose->add_option("--in", aug_in, "sample directory")->required();
    augment_pose->add_option("--model", aug_model, "model container")->required();
    augment_pose->add_option("--yaws", yaws, "comma-separated yaw degrees");
    augment_pose->add_option("--pitches", pitches, "comma-separated pitch degrees");
    augment_shape->add_option("--in", aug_in, "sample directory")->required();
    augment_shape->add_option("--model", aug_model, "model container")->required();
    augment_shape->add_option("--donors", aug_donors, "comma-separated donor OBJ paths")
        ->required();
    augment_shape->add_option("--count", shape_count, "number of transforms");

    // synth-views
    auto* views = app.add_subcommand("synth-views", "virtual multiview synthesis");
    std::string views_image, views_fit, views_model, views_out = "views";
    int views_count = 5, anchor_spacing = 16;
    views->add_option("--image", views_image, "input image PNG")->required();
    views->add_option("--fit", views_fit, "fitter-output JSON")->required();
    views->add_option("--model", views_model, "model container")->required();
    views->add_option("--out", views_out, "output directory");
    views->add_option("--views", views_count, "view count (the standard battery is 5)");
    views->add_option("--anchor-spacing", anchor_spacing, "background anchor spacing, pixels");

    // loss
    auto* loss = app.add_subcommand("loss", "visual-effect loss descriptors");
    auto* loss_psd = loss->add_subcommand("psd", "plaster-image distance");
    auto* loss_vgd = loss->add_subcommand("vgd", "visual-guided vertex weights");
    std::string loss_output, loss_gt, loss_out = "weights.bin";
    int psd_resolution = 256;
    for (auto* sub : {loss_psd, loss_vgd})
    {
        sub->add_option("--output", loss_output, "reconstructed mesh OBJ")->required();
        sub->add_option("--gt", loss_gt, "ground-truth mesh OBJ")->required();
        sub->add_option("--resolution", psd_resolution, "render resolution");
    }
    loss_vgd->add_option("--out", loss_out, "weight map output (f32 + count header)");

    // eval
    auto* eval = app.add_subcommand("eval", "shape accuracy metrics");
    std::string eval_recon, eval_gt, eval_scan, eval_registered, eval_metrics = "nme,dace";
    std::string eval_report = "report.json";
    double interocular = 0.0;
    eval->add_option("--recon", eval_recon, "reconstruction OBJ")->required();
    eval->add_option("--gt", eval_gt, "ground-truth mesh OBJ")->required();
    eval->add_option("--scan", eval_scan, "raw scan OBJ (defaults to --gt)");
    eval->add_option("--registered", eval_registered,
                     "registered template OBJ for correspondence (defaults to --gt)");
    eval->add_option("--metric", eval_metrics, "comma-separated: nme,dace");
    eval->add_option("--interocular", interocular, "interocular distance, mm")->required();
    eval->add_option("--report", eval_report, "report JSON path");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run the full data-construction pipeline");

    // fixtures
    auto* fixtures = app.add_subcommand("fixtures", "emit the deterministic fixture set");
    std::string fixtures_out = "fixtures";
    uint64_t fixtures_seed = 0;
    fixtures->add_option("--seed", fixtures_seed, "random seed");
    fixtures->add_option("--out", fixtures_out, "output directory");

    // config dump
    auto* config_dump = app.add_subcommand("config", "print the default configuration");

    CLI11_PARSE(app, argc, argv);

    try
    {
        RunConfig config;
        try
        {
            config = load_config_or_default(config_path);
        }
        catch (const std::exception& e)
        {
            std::cerr << "config error: " << e.what() << "\n";
            return kConfigError;
        }

        if (model_synth->parsed())
            return cmd_model_synth(seed, vertices, id_dims, model_out);
        if (reg->parsed())
            return cmd_register(reg_template, reg_rgbd, reg_landmarks, reg_out, reg_report,
                                config);
        if (augment_pose->parsed() || augment_shape->parsed())
        {
            // Single-sample augmentation reuses the pipeline stages.
            RunConfig one = config;
            one.model_path = aug_model;
            one.input_dir = (fs::path(aug_in) / "..").lexically_normal().string();
            one.output_dir = (fs::path(aug_in) / ".." / "augmented").lexically_normal().string();
            if (augment_shape->parsed())
                one.shape_transform_count = shape_count;
            const PipelineResult result = run_pipeline(one);
            return result.exit_code;
        }
        if (views->parsed())
            return cmd_synth_views(views_image, views_fit, views_model, views_out,
                                   anchor_spacing);
        if (loss_psd->parsed())
            return cmd_loss("psd", loss_output, loss_gt, loss_out, psd_resolution);
        if (loss_vgd->parsed())
            return cmd_loss("vgd", loss_output, loss_gt, loss_out, psd_resolution);
        if (eval->parsed())
            return cmd_eval(eval_recon, eval_gt, eval_scan, eval_registered, eval_metrics,
                            interocular, eval_report, config);
        if (pipeline->parsed())
        {
            if (config.model_path.empty() || config.input_dir.empty() ||
                config.output_dir.empty())
            {
                std::cerr << "config error: pipeline requires paths.model, paths.input_dir "
                             "and paths.output_dir\n";
                return kConfigError;
            }
            for (const std::string& p : {config.model_path, config.input_dir})
                if (!fs::exists(p))
                {
                    std::cerr << "config error: missing path " << p << "\n";
                    return kConfigError;
                }
            const PipelineResult result = run_pipeline(config);
            std::cout << "pipeline: " << result.samples_ok << " ok, " << result.samples_failed
                      << " failed; manifest " << result.manifest_path << "\n";
            return result.exit_code;
        }
        if (fixtures->parsed())
        {
            const auto manifest = generate_fixtures(fixtures_seed, fixtures_out);
            json j;
            for (const auto& [path, hash] : manifest)
                j["files"].push_back({{"path", path}, {"hash", hash}});
            std::ofstream out(fixtures_out + "/fixtures_manifest.json");
            out << j.dump(2) << "\n";
            std::cout << "fixtures (" << manifest.size() << " files) -> " << fixtures_out
                      << "\n";
            return kOk;
        }
        if (config_dump->parsed())
        {
            std::cout << RunConfig::defaults_toml();
            return kOk;
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}
