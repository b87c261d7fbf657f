/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/config.cpp
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
#include "facekit/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace facekit {

namespace {

std::string trim(const std::string& s)
{
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// key -> raw value text, keyed as "section.key".
std::map<std::string, std::string> parse_kv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("RunConfig: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[' && line.back() == ']')
        {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("RunConfig: malformed line " + std::to_string(line_no) +
                                     " in " + path);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

std::string parse_string(const std::string& raw)
{
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
        return raw.substr(1, raw.size() - 2);
    return raw;
}

double parse_number(const std::string& raw, const std::string& key)
{
    try
    {
        size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != raw.size())
            throw std::invalid_argument(raw);
        return v;
    }
    catch (const std::exception&)
    {
        throw std::runtime_error("RunConfig: '" + key + "' is not a number: " + raw);
    }
}

std::vector<double> parse_list(const std::string& raw, const std::string& key)
{
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
        throw std::runtime_error("RunConfig: '" + key + "' is not a list: " + raw);
    std::vector<double> values;
    std::stringstream ss(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
            values.push_back(parse_number(item, key));
    }
    return values;
}

} // namespace

RunConfig RunConfig::load(const std::string& path)
{
    const auto kv = parse_kv(path);
    RunConfig config;
    auto get = [&](const std::string& key) -> const std::string* {
        const auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto read_string = [&](const std::string& key, std::string& out) {
        if (const auto* raw = get(key))
            out = parse_string(*raw);
    };
    auto read_number = [&](const std::string& key, auto& out) {
        if (const auto* raw = get(key))
            out = static_cast<std::remove_reference_t<decltype(out)>>(parse_number(*raw, key));
    };
    auto read_list = [&](const std::string& key, std::vector<double>& out) {
        if (const auto* raw = get(key))
            out = parse_list(*raw, key);
    };

    read_string("paths.model", config.model_path);
    read_string("paths.input_dir", config.input_dir);
    read_string("paths.output_dir", config.output_dir);
    read_list("registration.stiffness_schedule", config.stiffness_schedule);
    read_number("registration.inner_rounds", config.inner_rounds);
    read_number("registration.w_data", config.w_data);
    read_number("registration.w_edge", config.w_edge);
    read_number("registration.w_cont", config.w_cont);
    read_number("registration.gate_distance", config.gate_distance);
    read_number("registration.gate_normal_deg", config.gate_normal_deg);
    read_list("augmentation.yaw_schedule", config.yaw_schedule);
    read_list("augmentation.pitch_schedule", config.pitch_schedule);
    read_number("augmentation.shape_transform_count", config.shape_transform_count);
    read_number("augmentation.anchor_spacing", config.anchor_spacing);
    read_number("augmentation.depth_smooth_weight", config.depth_smooth_weight);
    read_number("augmentation.occlusion_threshold", config.occlusion_threshold);
    read_number("augmentation.blend_band_mm", config.blend_band_mm);
    read_number("augmentation.texture_fit_iterations", config.texture_fit_iterations);
    read_number("augmentation.texture_fit_step", config.texture_fit_step);
    read_number("evaluation.spatial_tol_mm", config.spatial_tol_mm);
    read_number("evaluation.normal_tol_deg", config.normal_tol_deg);
    read_number("evaluation.psd_resolution", config.psd_resolution);
    read_number("run.seed", config.seed);
    read_number("run.workers", config.workers);

    // Reject unknown keys so typos do not silently fall back to defaults.
    static const char* known[] = {
        "paths.model", "paths.input_dir", "paths.output_dir",
        "registration.stiffness_schedule", "registration.inner_rounds", "registration.w_data",
        "registration.w_edge", "registration.w_cont", "registration.gate_distance",
        "registration.gate_normal_deg", "augmentation.yaw_schedule",
        "augmentation.pitch_schedule", "augmentation.shape_transform_count",
        "augmentation.anchor_spacing", "augmentation.depth_smooth_weight",
        "augmentation.occlusion_threshold", "augmentation.blend_band_mm",
        "augmentation.texture_fit_iterations", "augmentation.texture_fit_step",
        "evaluation.spatial_tol_mm", "evaluation.normal_tol_deg", "evaluation.psd_resolution",
        "run.seed", "run.workers"};
    for (const auto& [key, value] : kv)
    {
        bool ok = false;
        for (const char* k : known)
            ok = ok || key == k;
        if (!ok)
            throw std::runtime_error("RunConfig: unknown key '" + key + "'");
    }
    return config;
}

std::string RunConfig::defaults_toml()
{
    const RunConfig d;
    std::ostringstream out;
    auto list = [](const std::vector<double>& v) {
        std::ostringstream s;
        s << "[";
        for (size_t i = 0; i < v.size(); ++i)
            s << (i ? ", " : "") << v[i];
        s << "]";
        return s.str();
    };
    out << "[paths]\n"
        << "model = \"model.mm3d\"\n"
        << "input_dir = \"samples\"\n"
        << "output_dir = \"out\"\n\n"
        << "[registration]\n"
        << "stiffness_schedule = " << list(d.stiffness_schedule) << "\n"
        << "inner_rounds = " << d.inner_rounds << "\n"
        << "w_data = " << d.w_data << "\n"
        << "w_edge = " << d.w_edge << "\n"
        << "w_cont = " << d.w_cont << "\n"
        << "gate_distance = " << d.gate_distance << "\n"
        << "gate_normal_deg = " << d.gate_normal_deg << "\n\n"
        << "[augmentation]\n"
        << "yaw_schedule = " << list(d.yaw_schedule) << "\n"
        << "pitch_schedule = " << list(d.pitch_schedule) << "\n"
        << "shape_transform_count = " << d.shape_transform_count << "\n"
        << "anchor_spacing = " << d.anchor_spacing << "\n"
        << "depth_smooth_weight = " << d.depth_smooth_weight << "\n"
        << "occlusion_threshold = " << d.occlusion_threshold << "\n"
        << "blend_band_mm = " << d.blend_band_mm << "\n"
        << "texture_fit_iterations = " << d.texture_fit_iterations << "\n"
        << "texture_fit_step = " << d.texture_fit_step << "\n\n"
        << "[evaluation]\n"
        << "spatial_tol_mm = " << d.spatial_tol_mm << "\n"
        << "normal_tol_deg = " << d.normal_tol_deg << "\n"
        << "psd_resolution = " << d.psd_resolution << "\n\n"
        << "[run]\n"
        << "seed = " << d.seed << "\n"
        << "workers = " << d.workers << "\n";
    return out.str();
}

} // namespace facekit
