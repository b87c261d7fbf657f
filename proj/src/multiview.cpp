/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/multiview.cpp
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
#include "facekit/multiview.hpp"

#include "background_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace facekit {

ImageMesh build_image_mesh(const ImageRGB& image, const Mesh& fitted, int anchor_spacing)
{
    const int width = image.width();
    const int height = image.height();
    const detail::BackgroundMeshing meshing =
        detail::mesh_background(width, height, fitted, anchor_spacing);

    double mean_depth = 0.0;
    for (const Vec3& v : fitted.vertices)
        mean_depth += v.z();
    mean_depth /= static_cast<double>(fitted.vertices.size());

    ImageMesh out;
    out.image_width = width;
    out.image_height = height;
    out.face_vertex_count = fitted.vertex_count();
    out.mesh.vertices = fitted.vertices;
    out.mesh.triangles = fitted.triangles;
    for (const Vec2& a : meshing.anchor_positions)
        out.mesh.vertices.emplace_back(a.x(), a.y(), mean_depth);
    out.region.assign(out.mesh.vertices.size(), 0);
    for (int i = 0; i < out.face_vertex_count; ++i)
        out.region[i] = 1;

    const int n_ring = static_cast<int>(meshing.ring_vids.size());
    auto remap = [&](int idx) {
        return idx < n_ring ? meshing.ring_vids[idx]
                            : out.face_vertex_count + (idx - n_ring);
    };
    for (const auto& tri : meshing.triangles)
        out.mesh.triangles.push_back({remap(tri[0]), remap(tri[1]), remap(tri[2])});

    out.mesh.colors.resize(out.mesh.vertices.size());
    for (size_t i = 0; i < out.mesh.vertices.size(); ++i)
        out.mesh.colors[i] =
            sample_bilinear(image, out.mesh.vertices[i].x(), out.mesh.vertices[i].y());
    return out;
}

std::vector<double> visibility_scores(const ImageMesh& mesh)
{
    const VertexNormalField normals = compute_vertex_normals(mesh.mesh);
    std::vector<double> vis(normals.size());
    for (size_t i = 0; i < normals.size(); ++i)
        vis[i] = normals[i].z() + (mesh.region[i] ? 2.0 : 0.0);
    return vis;
}

Vec3 face_center(const ImageMesh& mesh)
{
    Vec3 c = Vec3::Zero();
    int n = 0;
    for (int i = 0; i < mesh.face_vertex_count; ++i)
    {
        c += mesh.mesh.vertices[i];
        ++n;
    }
    if (n == 0)
        throw std::invalid_argument("face_center: mesh has no face vertices");
    return c / n;
}

CameraPose make_view_pose(const Vec3& center, double pitch_deg, double yaw_deg)
{
    CameraPose pose;
    pose.R = rotation_pitch_yaw(pitch_deg, yaw_deg);
    pose.t3d = center - pose.R * center;
    return pose;
}

std::vector<std::pair<double, double>> synthesis_view_angles()
{
    return {{0, 0}, {0, 25}, {0, 50}, {15, 0}, {-25, 0}};
}

ViewSynthesis synthesize_view(const ImageMesh& mesh, const ImageMesh& flipped,
                              const CameraPose& view_pose)
{
    if (mesh.mesh.vertex_count() != flipped.mesh.vertex_count() ||
        mesh.mesh.triangle_count() != flipped.mesh.triangle_count() ||
        mesh.face_vertex_count != flipped.face_vertex_count)
        throw std::invalid_argument("synthesize_view: mesh and flipped mesh topology mismatch");

    const int width = mesh.image_width;
    const int height = mesh.image_height;
    const std::vector<double> vis_a = visibility_scores(mesh);
    const std::vector<double> vis_b = visibility_scores(flipped);
    const RenderBuffer buf_a = rasterize(mesh.mesh, view_pose, width, height);
    const RenderBuffer buf_b = rasterize(flipped.mesh, view_pose, width, height);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    const Image<double> vis_map_a = interpolate_attribute(buf_a, vis_a, neg_inf);
    const Image<double> vis_map_b = interpolate_attribute(buf_b, vis_b, neg_inf);

    ViewSynthesis out;
    out.color = ImageRGB(width, height, Vec3::Zero());
    out.alpha = Image<double>(width, height, 0.0);
    out.lambda = Image<double>(width, height, 0.0);
    out.lambda_flip = Image<double>(width, height, 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
        {
            const bool a_fg = buf_a.is_foreground(x, y);
            const bool b_fg = buf_b.is_foreground(x, y);
            if (!a_fg && !b_fg)
                continue;
            if (vis_map_a.at(x, y) >= vis_map_b.at(x, y))
            {
                out.color.at(x, y) = buf_a.color.at(x, y);
                out.alpha.at(x, y) = 1.0;
                out.lambda.at(x, y) = 1.0;
            }
            else
            {
                out.color.at(x, y) = buf_b.color.at(x, y);
                out.alpha.at(x, y) = 0.5;
                out.lambda_flip.at(x, y) = 0.5;
            }
        }
    return out;
}

ImageMesh mirror_register(const ImageMesh& mesh)
{
    ImageMesh flipped = mesh;
    const double w = mesh.image_width - 1;
    for (Vec3& v : flipped.mesh.vertices)
        v.x() = w - v.x();

    std::vector<Vec3> source, target;
    source.reserve(mesh.face_vertex_count);
    target.reserve(mesh.face_vertex_count);
    for (int i = 0; i < mesh.face_vertex_count; ++i)
    {
        source.push_back(flipped.mesh.vertices[i]);
        target.push_back(mesh.mesh.vertices[i]);
    }
    const CameraPose align = fit_rigid(source, target);
    for (Vec3& v : flipped.mesh.vertices)
        v = align.apply(v);
    return flipped;
}

ImageRGB warp_image_to_uv(const ImageRGB& image, const Mesh& fitted, int out_height,
                          int out_width)
{
    if (!fitted.has_uv())
        throw std::invalid_argument("warp_image_to_uv: fitted mesh has no uv coordinates");
    // Rasterize the mesh laid out flat on the UV chart, carrying image-plane
    // positions as the interpolated attribute.
    Mesh chart;
    chart.vertices.resize(fitted.vertices.size());
    chart.triangles = fitted.triangles;
    std::vector<Vec3> positions(fitted.vertices.size());
    for (size_t i = 0; i < fitted.vertices.size(); ++i)
    {
        chart.vertices[i] = Vec3(fitted.uv[i].x() * (out_width - 1),
                                 fitted.uv[i].y() * (out_height - 1), 0.0);
        positions[i] = Vec3(fitted.vertices[i].x(), fitted.vertices[i].y(), 0.0);
    }
    const RenderBuffer buf = rasterize(chart, CameraPose{}, positions, out_width, out_height);
    ImageRGB out(out_width, out_height, Vec3::Zero());
    for (int y = 0; y < out_height; ++y)
        for (int x = 0; x < out_width; ++x)
            if (buf.is_foreground(x, y))
            {
                const Vec3& p = buf.color.at(x, y);
                out.at(x, y) = sample_bilinear(image, p.x(), p.y());
            }
    return out;
}

} // namespace facekit
