/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/mesh.hpp
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

#include "facekit/image.hpp"

#include <array>
#include <string>
#include <vector>

namespace facekit {

/**
 * Triangulated surface with fixed topology. Positions are in model units
 * (millimetre scale); uv coordinates, when present, live in [0,1]^2 and
 * colors are RGB in [0,1]^3, both one entry per vertex.
 */
struct Mesh
{
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec2> uv;     // empty, or one per vertex
    std::vector<Vec3> colors; // empty, or one per vertex

    bool has_uv() const { return !uv.empty(); }
    bool has_colors() const { return !colors.empty(); }
    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
};

/// One unit normal per vertex.
using VertexNormalField = std::vector<Vec3>;

/**
 * Dense H x W grid of 3D displacement vectors indexed by uv coordinates.
 * Cell (0,0) maps to uv (0,0) and cell (W-1,H-1) to uv (1,1); sampling is
 * bilinear with closed-interval semantics at uv = 1.
 */
class UvDisplacementMap
{
public:
    UvDisplacementMap() = default;
    UvDisplacementMap(int width, int height, const Vec3& fill = Vec3::Zero());

    int width() const { return width_; }
    int height() const { return height_; }

    Vec3& at(int x, int y) { return grid_[static_cast<size_t>(y) * width_ + x]; }
    const Vec3& at(int x, int y) const { return grid_[static_cast<size_t>(y) * width_ + x]; }

    /// Bilinear interpolation of the four surrounding cells; throws if uv is outside [0,1]^2.
    Vec3 sample(const Vec2& uv) const;

    void save(const std::string& path) const;
    static UvDisplacementMap load(const std::string& path);

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Vec3> grid_;
};

/**
 * Area-weighted average of incident face normals, normalized to unit length.
 * Degenerate triangles (area below 1e-12 square model units) do not
 * contribute; a vertex with no contributing triangle is an error.
 */
VertexNormalField compute_vertex_normals(const Mesh& mesh);

/// Shorthand for UvDisplacementMap::sample.
Vec3 sample_uv_map(const UvDisplacementMap& map, const Vec2& uv);

/**
 * Adds the displacement sampled at each vertex's uv coordinate to the
 * coarse shape. Topology, uv and colors are carried over unchanged.
 */
Mesh apply_displacement(const Mesh& coarse, const UvDisplacementMap& map);

/// Edges that belong to exactly one triangle, as ordered (a,b) vertex pairs.
std::vector<std::array<int, 2>> boundary_edges(const Mesh& mesh);

/// Unique undirected edges of the triangulation.
std::vector<std::array<int, 2>> mesh_edges(const Mesh& mesh);

} // namespace facekit
