/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/config.hpp
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
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace facekit {

/**
 * Pipeline configuration: one TOML-style key-value file with a section per
 * subsystem. Every constant that is not forced by a file format lives here
 * with its default.
 */
struct RunConfig
{
    // [paths]
    std::string model_path;
    std::string input_dir;   // directory of sample directories
    std::string output_dir;

    // [registration]
    std::vector<double> stiffness_schedule{50, 20, 5, 2, 1};
    int inner_rounds = 3;
    double w_data = 1.0;
    double w_edge = 5.0;
    double w_cont = 2.0;
    double gate_distance = 10.0;
    double gate_normal_deg = 60.0;

    // [augmentation]
    std::vector<double> yaw_schedule{15, 30, 45, 50};
    std::vector<double> pitch_schedule{15, -25};
    int shape_transform_count = 4;
    int anchor_spacing = 16;
    double depth_smooth_weight = 1.0;
    double occlusion_threshold = 0.17;
    double blend_band_mm = 8.0;
    int texture_fit_iterations = 40;
    double texture_fit_step = 0.05;

    // [evaluation]
    double spatial_tol_mm = 4.0;
    double normal_tol_deg = 30.0;
    int psd_resolution = 256;

    // [run]
    uint64_t seed = 0;
    int workers = 1;

    static RunConfig load(const std::string& path);
    /// The full config with defaults, as a commented TOML document.
    static std::string defaults_toml();
};

} // namespace facekit
