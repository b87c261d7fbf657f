/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/background_mesh.hpp
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

#include <array>
#include <vector>

namespace facekit::detail {

/**
 * Background triangulation shared by image-mesh building, depth completion
 * and anchor warping: the face boundary ring plus an anchor lattice outside
 * the face's convex hull, Delaunay-triangulated. Node order is ring first,
 * then anchors; triangles index nodes.
 */
struct BackgroundMeshing
{
    std::vector<int> ring_vids;         // face vertex id per ring node
    std::vector<Vec2> anchor_positions; // lattice anchors (non-ring nodes)
    std::vector<std::array<int, 3>> triangles;

    int node_count() const
    {
        return static_cast<int>(ring_vids.size() + anchor_positions.size());
    }
};

BackgroundMeshing mesh_background(int width, int height, const Mesh& face_in_image, int spacing);

/// Counter-clockwise convex hull (y down) of the projected vertices.
std::vector<Vec2> convex_hull_2d(std::vector<Vec2> points);

/// True if p is inside the hull enlarged by margin (margin < 0 shrinks it).
bool inside_hull_2d(const std::vector<Vec2>& hull, const Vec2& p, double margin);

} // namespace facekit::detail
