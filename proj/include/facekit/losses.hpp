/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/losses.hpp
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

#include "facekit/mesh.hpp"
#include "facekit/morphable.hpp"
#include "facekit/rasterizer.hpp"

#include <vector>

namespace facekit {

/// Per-vertex nonnegative scalars (inverse-rendered visual weights, reliability masks).
using VertexWeightMap = std::vector<double>;

/**
 * Template-to-target vertex pairing with per-pair reliability: pair k maps
 * template vertex k to target vertex target_index[k].
 */
struct CorrespondenceSet
{
    std::vector<int> target_index;
    std::vector<uint8_t> reliable;

    int reliable_count() const;
};

/**
 * Squared vertex-position loss sum_k w_k || gt_k - coarse_k - delta_k ||^2;
 * unweighted when weights is null.
 */
double loss_mse(const Mesh& gt, const Mesh& coarse, const std::vector<Vec3>& delta,
                const VertexWeightMap* weights = nullptr);

/// The five plaster render rotations, (pitch, yaw) = (0,0), (0,90), (0,-90), (30,0), (-30,0).
std::vector<Mat3> psd_view_rotations();

struct PsdResult
{
    double distance = 0.0;                  // sum over views of the L2 image distance
    std::vector<Image<double>> error_maps;  // per-view |output - gt| gray rasters
    PlasterFraming framing;
};

/**
 * Plaster-image distance between two shapes: both are rendered shading-only
 * from every view under one shared framing, and the per-view L2 image
 * distances are summed. Pass an explicit framing for perturbation studies;
 * the default derives one from both meshes together (symmetric in the
 * arguments).
 */
PsdResult psd_distance(const Mesh& output, const Mesh& gt, const std::vector<Mat3>& views,
                       int width, int height, const PlasterFraming* framing = nullptr);

/**
 * Raw visual-attribution weights: every view's plaster error map is
 * inverse-rendered through BOTH meshes' pixel-vertex traces and accumulated
 * per vertex. The target-side trace is what restores weight to contour
 * vertices that the output-side render never covers.
 */
VertexWeightMap vgd_weights_raw(const Mesh& output, const Mesh& gt,
                                const std::vector<Mat3>& views, int width, int height,
                                const PlasterFraming* framing = nullptr);

/**
 * vgd_weights_raw normalized to mean 1 over the face region (all vertices
 * when the mask is empty); identically-zero raw weights degrade to uniform
 * ones so the weighted loss falls back to plain MSE.
 */
VertexWeightMap vgd_weights(const Mesh& output, const Mesh& gt, const std::vector<Mat3>& views,
                            int width, int height, const PlasterFraming* framing = nullptr,
                            const std::vector<uint8_t>& face_region = {});

/**
 * Nearest-neighbor pairing of registered template vertices onto the scan:
 * reliable iff the spatial distance is strictly below spatial_tol, the
 * normal angle strictly below normal_tol degrees, and the template vertex
 * is inside the annotated face region (empty mask = everywhere).
 */
CorrespondenceSet build_correspondence(const Mesh& template_mesh, const Mesh& gt_scan,
                                       const Mesh& registered, double spatial_tol_mm,
                                       double normal_tol_deg,
                                       const std::vector<uint8_t>& face_region = {});

/**
 * Normalized mean error: rigid-align the reconstruction onto the target
 * through the reliable pairs, then average the per-pair distances over ALL
 * pairs, normalized by the interocular distance d.
 */
double metric_nme(const Mesh& recon, const Mesh& gt, const CorrespondenceSet& corr, double d);

/**
 * Densely aligned chamfer error: align through the reliable pairs, then for
 * each reliable template vertex take its nearest neighbor on the raw scan
 * and average the normalized distances.
 */
double metric_dace(const Mesh& recon, const Mesh& gt_scan, const CorrespondenceSet& corr,
                   double d);

/// VertexWeightMap binary format: u32 count header then f32 little-endian entries.
void save_weight_map(const VertexWeightMap& weights, const std::string& path);
VertexWeightMap load_weight_map(const std::string& path);

} // namespace facekit
