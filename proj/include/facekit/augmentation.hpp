/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/augmentation.hpp
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
#include "facekit/registration.hpp"

#include <vector>

namespace facekit {

/**
 * Background anchor lattice with the face-contour ring: positions, depth
 * values, a hollow/valid flag per anchor, and the connectivity of the
 * background triangulation. The first contour_count anchors are the face
 * boundary ring.
 */
struct AnchorGraph
{
    struct Anchor
    {
        Vec2 xy = Vec2::Zero();
        double depth = 0.0;
        bool valid = false; // false = hollow (no depth observation)
    };
    std::vector<Anchor> anchors;
    std::vector<std::array<int, 2>> edges;
    int contour_count = 0;
    std::vector<int> contour_vids; // face vertex id per contour anchor
};

/**
 * Tiles anchors at the given spacing outside the face hull, triangulates
 * them with the face boundary ring and returns the ring + anchors as one
 * graph. When a frame is supplied, anchor depth observations and validity
 * come from it.
 */
AnchorGraph build_anchor_graph(int width, int height, const Mesh& face_in_image, int spacing,
                               const RGBDFrame* frame = nullptr);

/**
 * Anchor depths from the depth-data + smoothness objective, squared form:
 * sum_valid (d_i - depth_i)^2 + w * sum_edges (d_i - d_j)^2, solved as one
 * sparse system. Valid anchors carry their observation in Anchor::depth.
 * Throws if the graph is disconnected or has no valid anchor.
 */
std::vector<double> solve_anchor_depths(const AnchorGraph& graph, double smooth_weight);

/**
 * Dense depth for the whole frame: the face region takes the registered
 * face's z directly; elsewhere depth interpolates the anchor triangulation
 * with depths from solve_anchor_depths.
 */
Image<double> complete_depth(const RGBDFrame& frame, const Mesh& registered_face,
                             int anchor_spacing, double smooth_weight);

struct TextureParams
{
    Eigen::VectorXd beta;
    PhongParams phong;
};

struct TextureFitOptions
{
    int iterations = 40;
    double step = 0.05;
};

/**
 * Analysis-by-synthesis texture and lighting fit: alternates closed-form
 * linear solves for the texture coefficients and the diagonal light
 * matrices with finite-difference gradient steps on the light direction,
 * specular reflectance and shininess. Returns the best iterate; throws if
 * the residual grows for 5 consecutive iterations.
 */
TextureParams fit_texture(const ImageRGB& image, const Mesh& registered,
                          const MorphableModel& model, const TextureFitOptions& options = {});

/// Root-mean-square per-channel residual of a texture fit (diagnostic).
double texture_fit_residual(const ImageRGB& image, const Mesh& registered,
                            const MorphableModel& model, const TextureParams& params);

struct RotatedRender
{
    ImageRGB color;
    Image<double> depth;
    Image<uint8_t> inpainted; // 1 where model texture was blended in
};

struct RotateRenderOptions
{
    double occlusion_threshold = 0.17; // source visibility below this is inpainted
    int pad_spacing = 16;              // lattice step of the out-of-frame padding ring
};

/**
 * Lifts every pixel through the dense depth to a 3D lattice (padded past
 * the image border so rotations leave no holes), renders it at the target
 * pose with image colors, then re-renders self-occluded regions with the
 * fitted Phong model texture and blends them in by Poisson editing.
 */
RotatedRender rotate_and_render(const RGBDFrame& frame, const Mesh& registered,
                                const Image<double>& dense_depth, const CameraPose& target_pose,
                                const TextureParams& tex, const MorphableModel& model,
                                const RotateRenderOptions& options = {});

/**
 * Discrete Poisson editing: inside the mask the result carries the source
 * gradients with the target as Dirichlet boundary, per channel. An empty
 * mask returns the target unchanged; mask pixels on the image border are an
 * error.
 */
ImageRGB poisson_blend(const ImageRGB& target, const ImageRGB& source,
                       const Image<uint8_t>& mask);

struct DonorParts
{
    Mesh eyes;
    Mesh nose;
    Mesh mouth;
    Mesh cheek;
};

/**
 * Per-vertex donor selection by region label with a linear cross-fade to
 * the nearest other region inside the blend band (band width in edge hops).
 * Every output vertex is a convex combination of at most two donors.
 */
Mesh fuse_target_shape(const DonorParts& parts, const std::vector<int>& region_labels,
                       int blend_band_hops);

/**
 * Moves the anchor lattice to follow a new face contour: anchors matched to
 * the source contour points are pinned at the corresponding target contour
 * positions while all neighbor offsets are preserved, solved as sparse
 * least squares independently in x and y.
 */
AnchorGraph warp_background_anchors(const AnchorGraph& source_anchors,
                                    const std::vector<Vec2>& source_contour,
                                    const std::vector<Vec2>& target_contour);

/**
 * Shading adjustment for a shape swap: re-evaluates the Phong model with
 * the source's texture colors and lighting but the target shape's normals
 * and reflection directions.
 */
std::vector<Vec3> adjust_shading(const std::vector<Vec3>& image_colors, const Mesh& source_shape,
                                 const Mesh& target_shape, const TextureParams& tex);

} // namespace facekit
