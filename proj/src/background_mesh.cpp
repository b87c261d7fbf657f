/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/background_mesh.cpp
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
#include "background_mesh.hpp"

#include "facekit/delaunay.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace facekit::detail {

std::vector<Vec2> convex_hull_2d(std::vector<Vec2> pts)
{
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a == b; }),
              pts.end());
    const int n = static_cast<int>(pts.size());
    if (n < 3)
        throw std::invalid_argument("convex_hull_2d: need at least 3 distinct points");
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Vec2> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i)
    {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0)
            --k;
        hull[k++] = pts[i];
    }
    for (int i = n - 2, lower = k + 1; i >= 0; --i)
    {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0)
            --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

bool inside_hull_2d(const std::vector<Vec2>& hull, const Vec2& p, double margin)
{
    for (size_t i = 0; i < hull.size(); ++i)
    {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % hull.size()];
        const Vec2 edge = b - a;
        const double len = edge.norm();
        if (len < 1e-12)
            continue;
        const double side = (edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x())) / len;
        if (side < -margin)
            return false;
    }
    return true;
}

BackgroundMeshing mesh_background(int width, int height, const Mesh& face_in_image, int spacing)
{
    if (spacing < 2)
        throw std::invalid_argument("mesh_background: anchor spacing must be at least 2");
    if (face_in_image.vertices.empty() || face_in_image.triangles.empty())
        throw std::invalid_argument("mesh_background: face mesh is empty");

    std::vector<Vec2> projected(face_in_image.vertices.size());
    for (size_t i = 0; i < face_in_image.vertices.size(); ++i)
        projected[i] = face_in_image.vertices[i].head<2>();
    const std::vector<Vec2> hull = convex_hull_2d(projected);

    BackgroundMeshing out;
    {
        std::set<int> ring_set;
        for (const auto& edge : boundary_edges(face_in_image))
        {
            ring_set.insert(edge[0]);
            ring_set.insert(edge[1]);
        }
        out.ring_vids.assign(ring_set.begin(), ring_set.end());
    }
    if (out.ring_vids.empty())
        throw std::invalid_argument("mesh_background: face mesh has no boundary");

    std::vector<double> xs, ys;
    for (int x = 0; x < width; x += spacing)
        xs.push_back(x);
    if (xs.back() != width - 1)
        xs.push_back(width - 1);
    for (int y = 0; y < height; y += spacing)
        ys.push_back(y);
    if (ys.back() != height - 1)
        ys.push_back(height - 1);
    for (const double y : ys)
        for (const double x : xs)
        {
            const Vec2 p(x, y);
            if (!inside_hull_2d(hull, p, 1.0))
                out.anchor_positions.push_back(p);
        }
    if (out.anchor_positions.empty())
        throw std::runtime_error("mesh_background: face covers the entire image, no anchors");

    std::vector<Vec2> nodes;
    nodes.reserve(out.node_count());
    for (const int v : out.ring_vids)
        nodes.push_back(projected[v]);
    for (const Vec2& a : out.anchor_positions)
        nodes.push_back(a);
    const int n_ring = static_cast<int>(out.ring_vids.size());
    for (const auto& tri : delaunay_triangulate(nodes))
    {
        // All-ring triangles span the face interior.
        if (tri[0] < n_ring && tri[1] < n_ring && tri[2] < n_ring)
            continue;
        out.triangles.push_back(tri);
    }

    // Ring vertices tucked behind the visible rim keep no background
    // triangle; drop them so the node graph stays connected.
    std::vector<int> degree(out.node_count(), 0);
    for (const auto& tri : out.triangles)
        for (const int v : tri)
            ++degree[v];
    std::vector<int> remap(out.node_count(), -1);
    std::vector<int> kept_ring;
    std::vector<Vec2> kept_anchors;
    int next = 0;
    for (int i = 0; i < n_ring; ++i)
        if (degree[i] > 0)
        {
            remap[i] = next++;
            kept_ring.push_back(out.ring_vids[i]);
        }
    for (int i = n_ring; i < out.node_count(); ++i)
        if (degree[i] > 0)
        {
            remap[i] = next++;
            kept_anchors.push_back(out.anchor_positions[i - n_ring]);
        }
    out.ring_vids = std::move(kept_ring);
    out.anchor_positions = std::move(kept_anchors);
    for (auto& tri : out.triangles)
        for (int& v : tri)
            v = remap[v];
    return out;
}

} // namespace facekit::detail
