/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/rasterizer.hpp
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

#include <limits>
#include <vector>

namespace facekit {

/**
 * Per-pixel output of the forward renderer. Depth uses the weak-perspective
 * convention (larger = nearer); background pixels carry -infinity depth and
 * tri_index kBackgroundIndex. The triangle list of the rasterized mesh is
 * retained so that (tri_index, bary) doubles as the pixel-to-vertex trace
 * consumed by inverse rendering.
 */
struct RenderBuffer
{
    static constexpr int kBackgroundIndex = -1;

    int width = 0;
    int height = 0;
    ImageRGB color;
    Image<double> depth;
    Image<int> tri_index;
    Image<Vec3> bary;
    std::vector<std::array<int, 3>> triangles;

    bool is_foreground(int x, int y) const { return tri_index.at(x, y) != kBackgroundIndex; }
};

/**
 * Z-buffered triangle rasterization at integer pixel centers with the
 * top-left fill rule. No back-face culling, no anti-aliasing; per-pixel
 * color is the barycentric blend of the per-vertex texture.
 */
RenderBuffer rasterize(const Mesh& mesh, const CameraPose& pose, const std::vector<Vec3>& texture,
                       int width, int height);

/// Convenience overload that rasterizes with the mesh's own vertex colors.
RenderBuffer rasterize(const Mesh& mesh, const CameraPose& pose, int width, int height);

/// Interpolates an arbitrary per-vertex attribute through a render buffer's trace.
template <typename T>
Image<T> interpolate_attribute(const RenderBuffer& buffer, const std::vector<T>& attribute,
                               const T& background)
{
    Image<T> out(buffer.width, buffer.height, background);
    for (int y = 0; y < buffer.height; ++y)
        for (int x = 0; x < buffer.width; ++x)
        {
            const int tri = buffer.tri_index.at(x, y);
            if (tri == RenderBuffer::kBackgroundIndex)
                continue;
            const auto& ids = buffer.triangles[tri];
            const Vec3& b = buffer.bary.at(x, y);
            out.at(x, y) = attribute[ids[0]] * b[0] + attribute[ids[1]] * b[1] +
                           attribute[ids[2]] * b[2];
        }
    return out;
}

/**
 * Shared scale and center so that two shapes render into comparable frames:
 * projected position = scale * R_view * (v - center) + image center.
 */
struct PlasterFraming
{
    double scale = 1.0;
    Vec3 center = Vec3::Zero();
};

/// Framing that keeps every listed mesh inside the frame under any rotation.
PlasterFraming default_plaster_framing(const std::vector<const Mesh*>& meshes, int width,
                                       int height, double fill = 0.45);

/**
 * Shading-only render: rotates the mesh, assigns per-vertex gray
 * max(0, n_z) from the rotated vertex normal (head-on directional light on
 * white plaster) and rasterizes. Any vertex colors on the mesh are ignored.
 */
RenderBuffer render_plaster(const Mesh& mesh, const Mat3& view_rotation, int width, int height,
                            const PlasterFraming& framing);

/**
 * Distributes each foreground pixel's error onto the three vertices of its
 * triangle, weighted by barycentric coordinates. Background-pixel errors are
 * discarded, which is precisely why plaster-image losses starve contour
 * vertices that project outside the rendered silhouette.
 */
std::vector<double> inverse_render(const RenderBuffer& buffer, const Image<double>& pixel_error,
                                   int vertex_count);

/**
 * Phong lighting configuration. The ambient and directional lights are
 * diagonal color matrices stored as their diagonals.
 */
struct PhongParams
{
    Vec3 amb = Vec3::Ones();  // ambient diagonal
    Vec3 dir = Vec3::Zero();  // directional diagonal
    Vec3 l = Vec3(0, 0, 1);   // unit light direction
    double k_s = 0.0;         // specular reflectance
    Vec3 ve = Vec3(0, 0, 1);  // unit view direction
    double nu = 1.0;          // shininess exponent

    void validate() const;
};

/**
 * Per-vertex color amb*T + dir*T*<n,l> + k_s*dir*<r,ve>^nu with
 * r = 2<n,l>n - l, dot products clamped at zero before use, and the result
 * clamped to [0,1].
 */
std::vector<Vec3> phong_shade(const Mesh& mesh, const std::vector<Vec3>& texture,
                              const PhongParams& lighting);

/// phong_shade against precomputed normals (used when the mesh is a partial surface).
std::vector<Vec3> phong_shade(const VertexNormalField& normals, const std::vector<Vec3>& texture,
                              const PhongParams& lighting);

} // namespace facekit
