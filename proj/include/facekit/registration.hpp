/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/registration.hpp
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

#include <Eigen/Core>

#include <vector>

namespace facekit {

/**
 * Single-view RGB-D sample. Depth shares the renderer's weak-perspective
 * convention (aligned to color pixels, larger = nearer, millimetres);
 * invalid pixels are flagged off in the mask.
 */
struct RGBDFrame
{
    ImageRGB color;
    Image<double> depth;
    Image<uint8_t> valid;

    int width() const { return depth.width(); }
    int height() const { return depth.height(); }
};

/**
 * Semantic 2D constraints: dense landmarks enclosing eyes, eyebrows and
 * mouth, each tied to one template vertex, plus the ordered face-contour
 * polyline.
 */
struct LandmarkSet
{
    struct EdgePoint
    {
        Vec2 xy;
        int vertex_id;
    };
    std::vector<EdgePoint> edge_points;
    std::vector<Vec2> contour;
};

/// One 3x4 affine per template vertex; position = A * (x, y, z, 1).
using PerVertexAffine = std::vector<Eigen::Matrix<double, 3, 4>>;

struct PointCloud
{
    std::vector<Vec3> points;
    std::vector<Vec3> normals;         // valid where has_normal != 0
    std::vector<uint8_t> has_normal;
    Image<int> index_map;              // pixel -> point index, -1 where invalid
};

/**
 * Lifts valid depth pixels to (x, y, depth) points. Normals come from
 * central depth differences, oriented toward the viewer; pixels adjacent to
 * invalid depth carry no normal. Throws when the validity mask is empty.
 */
PointCloud backproject_depth(const RGBDFrame& frame);

/**
 * For each query point, the exactly-closest point on the polyline
 * (projection onto segments, not the nearest knot).
 */
std::vector<Vec2> contour_correspondence(const std::vector<Vec2>& points,
                                         const std::vector<Vec2>& curve);

/**
 * Occluding-contour vertices: endpoints of edges whose two incident
 * triangles flip projected winding under the pose. When a band of eligible
 * vertex ids is given the selection is restricted to it.
 */
std::vector<int> select_contour_vertices(const Mesh& mesh, const CameraPose& pose,
                                         const std::vector<int>& band = {});

struct NicpOptions
{
    std::vector<double> stiffness_schedule{50, 20, 5, 2, 1};
    int inner_rounds = 3;
    double w_data = 1.0;
    double w_edge = 5.0;
    double w_cont = 2.0;
    double gate_distance = 10.0;    // millimetres
    double gate_normal_deg = 60.0;
    double min_visibility = 0.25;   // data term only for camera-facing vertices
    int pixel_window = 2;           // projective association window, pixels
    std::vector<int> contour_band;  // template vertices eligible for contour matching
};

struct NicpIteration
{
    double stiffness = 0.0;
    int round = 0;
    double e_data = 0.0;
    double e_smooth = 0.0;
    double e_edge = 0.0;
    double e_cont = 0.0;
    double e_total = 0.0;
    int active_pairs = 0;
    bool gating_changed = false; // correspondence set differs from the previous round
};

struct NicpResult
{
    Mesh registered;
    PerVertexAffine transforms;
    std::vector<NicpIteration> trace;
};

/**
 * Optimal-step non-rigid ICP with semantic terms. Each outer iteration
 * fixes correspondences (gated closest points into the depth cloud, 2D
 * landmark pairs, closest points of projected contour vertices on the
 * contour curve) and solves one sparse linear least-squares system for all
 * per-vertex affines, annealing the stiffness down the schedule. The 2D
 * terms constrain only the first two affine rows; the third row sees only
 * data and stiffness equations. The template must already sit in the image
 * frame of the RGB-D data.
 */
NicpResult nonrigid_icp(const Mesh& template_mesh, const RGBDFrame& frame,
                        const LandmarkSet& landmarks, const NicpOptions& options = {});

} // namespace facekit
