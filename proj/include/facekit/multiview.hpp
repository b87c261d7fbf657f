/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/multiview.hpp
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

#include <utility>
#include <vector>

namespace facekit {

/**
 * An input image lifted to 3D: the fitted face mesh in image coordinates
 * plus background anchors at the mean face depth, triangulated against the
 * face boundary. Face vertices come first; regions flag face vs background.
 */
struct ImageMesh
{
    Mesh mesh;
    std::vector<uint8_t> region; // 1 = face, 0 = background anchor
    int face_vertex_count = 0;
    int image_width = 0;
    int image_height = 0;

    bool is_face_vertex(int i) const { return region[i] != 0; }
};

/**
 * Lifts an image to an ImageMesh: anchors are tiled at the given spacing
 * outside the face's convex hull, set to the mean face depth, and
 * Delaunay-triangulated together with the face boundary. Every vertex color
 * is sampled bilinearly from the image. Throws when the face leaves no room
 * for anchors.
 */
ImageMesh build_image_mesh(const ImageRGB& image, const Mesh& fitted, int anchor_spacing);

/**
 * Per-vertex visibility score against view direction l = (0,0,1), evaluated
 * in the original image frame: l . n + 2 on the face region, l . n on the
 * background. The offset guarantees face texture beats background texture
 * wherever both are candidates.
 */
std::vector<double> visibility_scores(const ImageMesh& mesh);

struct ViewSynthesis
{
    ImageRGB color;
    Image<double> alpha;       // 1 original, 0.5 mirrored fill, 0 uncovered
    Image<double> lambda;      // weight of the original mesh (1 or 0)
    Image<double> lambda_flip; // weight of the mirrored mesh (0 or 0.5)
};

/**
 * Renders original and mirror-registered meshes to the target view, renders
 * both visibility score fields the same way, and blends per pixel: the
 * original wins wherever its visibility is at least the mirrored one
 * (lambda = 1), otherwise the mirrored texture fills in at half opacity
 * (lambda_flip = 0.5).
 */
ViewSynthesis synthesize_view(const ImageMesh& mesh, const ImageMesh& flipped,
                              const CameraPose& view_pose);

/**
 * Mirrors the mesh about the vertical image midline (x -> width-1-x,
 * colors travelling with their vertices), then rigidly aligns the mirrored
 * face region onto the original so both occupy one frame.
 */
ImageMesh mirror_register(const ImageMesh& mesh);

/**
 * Pulls the image onto the UV chart: each UV-grid cell inside the chart
 * finds its UV triangle, interpolates the triangle's image-plane position
 * barycentrically and samples the image bilinearly. Cells outside the chart
 * are zero.
 */
ImageRGB warp_image_to_uv(const ImageRGB& image, const Mesh& fitted, int out_height,
                          int out_width);

/// The standard view battery for view synthesis, as (pitch, yaw) degrees.
std::vector<std::pair<double, double>> synthesis_view_angles();

/// Camera rotating by (pitch, yaw) about a fixed center, with unit scale.
CameraPose make_view_pose(const Vec3& center, double pitch_deg, double yaw_deg);

/// Mean position of the face-region vertices.
Vec3 face_center(const ImageMesh& mesh);

} // namespace facekit
