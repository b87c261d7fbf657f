/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/fixtures.hpp
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

#include "facekit/augmentation.hpp"
#include "facekit/morphable.hpp"
#include "facekit/registration.hpp"

#include <cstdint>
#include <string>

namespace facekit {

/// Unit icosphere by icosahedron subdivision; outward normals.
Mesh make_icosphere(int subdivisions, double radius = 1.0);

/**
 * A complete synthetic capture: the model, a ground-truth face (PCA part
 * plus a smooth off-model displacement) posed into the image frame at one
 * pixel per millimetre, the rendered RGB-D frame, perfect landmarks, and
 * the initial-fit parameters a fitter would hand over.
 */
struct FixtureSample
{
    SyntheticModel synth;
    ShapeParams gt_params;        // PCA component of the ground truth
    std::vector<Vec3> gt_offset;  // smooth off-model displacement (canonical frame)
    CameraPose pose;              // canonical -> image frame
    Mesh gt_image_mesh;           // ground-truth face in the image frame
    RGBDFrame frame;
    LandmarkSet landmarks;
    TextureParams gt_texture;     // lighting + texture used to shade the frame
};

struct FixtureOptions
{
    uint64_t seed = 0;
    int image_size = 192;
    int vertex_target = 900;
    double pca_magnitude = 40.0;     // scale of the random PCA coefficients
    double offset_magnitude = 2.5;   // scale of the smooth off-model field, millimetres
    double eye_shift_px = 0.0;       // lateral eye displacement for the ablation fixture
};

FixtureSample make_fixture_sample(const FixtureOptions& options);

/// Triangulated surface over the valid depth pixels (the "raw scan" stand-in).
Mesh make_scan_mesh(const RGBDFrame& frame);

/**
 * Writes the on-disk fixture set consumed by the pipeline: the synthetic
 * model container, a sample directory (image, depth + sidecar, landmarks,
 * initial fit) and four donor shapes. Returns the manifest of written
 * files with content hashes.
 */
std::vector<std::pair<std::string, std::string>> generate_fixtures(uint64_t seed,
                                                                   const std::string& out_dir);

/// FNV-1a 64-bit content hash of a file, as fixed-width hex.
std::string hash_file_hex(const std::string& path);

/**
 * Sample directory I/O. A sample directory holds image.png (8-bit RGB),
 * depth.png (16-bit, value 0 = invalid, 1..65535 affine-mapped through the
 * depth.json sidecar), landmarks.json and fit.json.
 */
void save_rgbd(const RGBDFrame& frame, const std::string& dir);
RGBDFrame load_rgbd(const std::string& dir);

/// Landmark JSON: {"edge":[{"xy":[x,y],"vid":k}...], "contour":[[x,y]...]}.
void save_landmarks(const LandmarkSet& landmarks, const std::string& path);
LandmarkSet load_landmarks(const std::string& path);

/// Fitter-output JSON: shape params plus camera pose (f, 9 row-major R entries, t3d).
void save_fit(const ShapeParams& params, const CameraPose& pose, const std::string& path);
std::pair<ShapeParams, CameraPose> load_fit(const std::string& path);

} // namespace facekit
