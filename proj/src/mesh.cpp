/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/mesh.cpp
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
#include "facekit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace facekit {

namespace {
constexpr double kDegenerateArea = 1e-12;
} // namespace

UvDisplacementMap::UvDisplacementMap(int width, int height, const Vec3& fill)
    : width_(width), height_(height), grid_(static_cast<size_t>(width) * height, fill)
{
    if (width < 2 || height < 2)
        throw std::invalid_argument("UvDisplacementMap: grid must be at least 2x2");
}

Vec3 UvDisplacementMap::sample(const Vec2& uv) const
{
    if (uv.x() < 0.0 || uv.x() > 1.0 || uv.y() < 0.0 || uv.y() > 1.0)
        throw std::out_of_range("UvDisplacementMap::sample: uv outside [0,1]^2");
    const double gx = uv.x() * (width_ - 1);
    const double gy = uv.y() * (height_ - 1);
    // uv = 1 clamps into the last cell (closed-interval semantics).
    const int x0 = std::min(static_cast<int>(gx), width_ - 2);
    const int y0 = std::min(static_cast<int>(gy), height_ - 2);
    const double fx = gx - x0;
    const double fy = gy - y0;
    return at(x0, y0) * ((1 - fx) * (1 - fy)) + at(x0 + 1, y0) * (fx * (1 - fy)) +
           at(x0, y0 + 1) * ((1 - fx) * fy) + at(x0 + 1, y0 + 1) * (fx * fy);
}

void UvDisplacementMap::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("UvDisplacementMap::save: cannot open " + path);
    out.write("UVDM", 4);
    const uint32_t h = static_cast<uint32_t>(height_);
    const uint32_t w = static_cast<uint32_t>(width_);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    for (const Vec3& v : grid_)
    {
        const float f[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()),
                            static_cast<float>(v.z())};
        out.write(reinterpret_cast<const char*>(f), sizeof(f));
    }
    if (!out)
        throw std::runtime_error("UvDisplacementMap::save: write failed for " + path);
}

UvDisplacementMap UvDisplacementMap::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("UvDisplacementMap::load: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "UVDM", 4) != 0)
        throw std::runtime_error("UvDisplacementMap::load: bad magic in " + path);
    uint32_t h = 0, w = 0;
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    if (!in || h < 2 || w < 2 || h > 1u << 16 || w > 1u << 16)
        throw std::runtime_error("UvDisplacementMap::load: bad header in " + path);
    UvDisplacementMap map(static_cast<int>(w), static_cast<int>(h));
    for (size_t i = 0; i < map.grid_.size(); ++i)
    {
        float f[3];
        in.read(reinterpret_cast<char*>(f), sizeof(f));
        map.grid_[i] = Vec3(f[0], f[1], f[2]);
    }
    if (!in)
        throw std::runtime_error("UvDisplacementMap::load: truncated file " + path);
    return map;
}

VertexNormalField compute_vertex_normals(const Mesh& mesh)
{
    if (mesh.triangles.empty())
        throw std::invalid_argument("compute_vertex_normals: mesh has no triangles");
    VertexNormalField accum(mesh.vertices.size(), Vec3::Zero());
    for (const auto& tri : mesh.triangles)
    {
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        const Vec3 cross = (b - a).cross(c - a); // norm = 2 * area
        if (0.5 * cross.norm() < kDegenerateArea)
            continue;
        // Area weighting: the unnormalized cross product already carries the area.
        accum[tri[0]] += cross;
        accum[tri[1]] += cross;
        accum[tri[2]] += cross;
    }
    for (size_t i = 0; i < accum.size(); ++i)
    {
        const double norm = accum[i].norm();
        if (norm == 0.0)
            throw std::runtime_error("compute_vertex_normals: vertex " + std::to_string(i) +
                                     " has no incident non-degenerate triangle");
        accum[i] /= norm;
    }
    return accum;
}

Vec3 sample_uv_map(const UvDisplacementMap& map, const Vec2& uv)
{
    return map.sample(uv);
}

Mesh apply_displacement(const Mesh& coarse, const UvDisplacementMap& map)
{
    if (!coarse.has_uv())
        throw std::invalid_argument("apply_displacement: mesh has no uv coordinates");
    Mesh out = coarse;
    for (size_t i = 0; i < out.vertices.size(); ++i)
        out.vertices[i] += map.sample(coarse.uv[i]);
    return out;
}

std::vector<std::array<int, 2>> boundary_edges(const Mesh& mesh)
{
    std::map<std::pair<int, int>, int> count;
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e)
        {
            const int a = tri[e];
            const int b = tri[(e + 1) % 3];
            ++count[{std::min(a, b), std::max(a, b)}];
        }
    std::vector<std::array<int, 2>> edges;
    for (const auto& [edge, n] : count)
        if (n == 1)
            edges.push_back({edge.first, edge.second});
    return edges;
}

std::vector<std::array<int, 2>> mesh_edges(const Mesh& mesh)
{
    std::map<std::pair<int, int>, int> seen;
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e)
        {
            const int a = tri[e];
            const int b = tri[(e + 1) % 3];
            ++seen[{std::min(a, b), std::max(a, b)}];
        }
    std::vector<std::array<int, 2>> edges;
    edges.reserve(seen.size());
    for (const auto& [edge, n] : seen)
        edges.push_back({edge.first, edge.second});
    return edges;
}

} // namespace facekit
