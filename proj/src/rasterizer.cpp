/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/rasterizer.cpp
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
#include "facekit/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace facekit {

namespace {

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Shared-edge pixels land in exactly one of the two adjacent triangles: the
// edge direction reverses in the neighbor, flipping this predicate.
bool is_top_left(const Vec2& a, const Vec2& b)
{
    return (a.y() == b.y() && b.x() > a.x()) || (b.y() > a.y());
}

} // namespace

RenderBuffer rasterize(const Mesh& mesh, const CameraPose& pose, const std::vector<Vec3>& texture,
                       int width, int height)
{
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("rasterize: image dimensions must be positive");
    if (texture.size() != mesh.vertices.size())
        throw std::invalid_argument("rasterize: texture has " + std::to_string(texture.size()) +
                                    " colors for " + std::to_string(mesh.vertices.size()) +
                                    " vertices");
    pose.validate();

    RenderBuffer buf;
    buf.width = width;
    buf.height = height;
    buf.color = ImageRGB(width, height, Vec3::Zero());
    buf.depth = Image<double>(width, height, -std::numeric_limits<double>::infinity());
    buf.tri_index = Image<int>(width, height, RenderBuffer::kBackgroundIndex);
    buf.bary = Image<Vec3>(width, height, Vec3::Zero());
    buf.triangles = mesh.triangles;

    std::vector<Vec3> projected(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        projected[i] = pose.apply(mesh.vertices[i]);

    for (size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        const auto& tri = mesh.triangles[t];
        int order[3] = {0, 1, 2};
        Vec2 p[3];
        for (int k = 0; k < 3; ++k)
            p[k] = projected[tri[k]].head<2>();
        double area = orient2d(p[0], p[1], p[2]);
        if (area == 0.0)
            continue;
        if (area < 0.0)
        {
            // Culling is off: flipped triangles rasterize with reversed order.
            std::swap(order[1], order[2]);
            std::swap(p[1], p[2]);
            area = -area;
        }

        const double min_x = std::min({p[0].x(), p[1].x(), p[2].x()});
        const double max_x = std::max({p[0].x(), p[1].x(), p[2].x()});
        const double min_y = std::min({p[0].y(), p[1].y(), p[2].y()});
        const double max_y = std::max({p[0].y(), p[1].y(), p[2].y()});
        const int x0 = std::max(0, static_cast<int>(std::ceil(min_x)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(max_x)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(min_y)));
        const int y1 = std::min(height - 1, static_cast<int>(std::floor(max_y)));
        if (x0 > x1 || y0 > y1)
            continue;

        const bool tl0 = is_top_left(p[1], p[2]);
        const bool tl1 = is_top_left(p[2], p[0]);
        const bool tl2 = is_top_left(p[0], p[1]);
        const double z[3] = {projected[tri[order[0]]].z(), projected[tri[order[1]]].z(),
                             projected[tri[order[2]]].z()};

        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
            {
                const Vec2 q(static_cast<double>(x), static_cast<double>(y));
                const double w0 = orient2d(p[1], p[2], q);
                const double w1 = orient2d(p[2], p[0], q);
                const double w2 = orient2d(p[0], p[1], q);
                const bool inside = (w0 > 0.0 || (w0 == 0.0 && tl0)) &&
                                    (w1 > 0.0 || (w1 == 0.0 && tl1)) &&
                                    (w2 > 0.0 || (w2 == 0.0 && tl2));
                if (!inside)
                    continue;
                const double b0 = w0 / area;
                const double b1 = w1 / area;
                const double b2 = w2 / area;
                const double depth = b0 * z[0] + b1 * z[1] + b2 * z[2];
                if (depth <= buf.depth.at(x, y))
                    continue;
                buf.depth.at(x, y) = depth;
                buf.tri_index.at(x, y) = static_cast<int>(t);
                Vec3 bary = Vec3::Zero();
                bary[order[0]] = b0;
                bary[order[1]] = b1;
                bary[order[2]] = b2;
                buf.bary.at(x, y) = bary;
                buf.color.at(x, y) = texture[tri[0]] * bary[0] + texture[tri[1]] * bary[1] +
                                     texture[tri[2]] * bary[2];
            }
    }
    return buf;
}

RenderBuffer rasterize(const Mesh& mesh, const CameraPose& pose, int width, int height)
{
    if (!mesh.has_colors())
        throw std::invalid_argument("rasterize: mesh carries no vertex colors");
    return rasterize(mesh, pose, mesh.colors, width, height);
}

PlasterFraming default_plaster_framing(const std::vector<const Mesh*>& meshes, int width,
                                       int height, double fill)
{
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Mesh* mesh : meshes)
        for (const Vec3& v : mesh->vertices)
        {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    if (!lo.allFinite())
        throw std::invalid_argument("default_plaster_framing: no vertices");
    PlasterFraming framing;
    framing.center = 0.5 * (lo + hi);
    double radius = 0.0;
    for (const Mesh* mesh : meshes)
        for (const Vec3& v : mesh->vertices)
            radius = std::max(radius, (v - framing.center).norm());
    framing.scale = radius > 0.0 ? fill * std::min(width, height) / radius : 1.0;
    return framing;
}

RenderBuffer render_plaster(const Mesh& mesh, const Mat3& view_rotation, int width, int height,
                            const PlasterFraming& framing)
{
    const VertexNormalField normals = compute_vertex_normals(mesh);
    std::vector<Vec3> gray(mesh.vertices.size());
    for (size_t i = 0; i < normals.size(); ++i)
    {
        const double g = std::max(0.0, (view_rotation * normals[i]).z());
        gray[i] = Vec3(g, g, g);
    }
    CameraPose pose;
    pose.f = framing.scale;
    pose.R = view_rotation;
    pose.t3d = Vec3(0.5 * width, 0.5 * height, 0.0) -
               framing.scale * (view_rotation * framing.center);
    return rasterize(mesh, pose, gray, width, height);
}

std::vector<double> inverse_render(const RenderBuffer& buffer, const Image<double>& pixel_error,
                                   int vertex_count)
{
    if (pixel_error.width() != buffer.width || pixel_error.height() != buffer.height)
        throw std::invalid_argument("inverse_render: error map dimensions do not match buffer");
    std::vector<double> weights(vertex_count, 0.0);
    for (int y = 0; y < buffer.height; ++y)
        for (int x = 0; x < buffer.width; ++x)
        {
            const int tri = buffer.tri_index.at(x, y);
            if (tri == RenderBuffer::kBackgroundIndex)
                continue;
            const double err = pixel_error.at(x, y);
            const auto& ids = buffer.triangles[tri];
            const Vec3& b = buffer.bary.at(x, y);
            for (int k = 0; k < 3; ++k)
                weights[ids[k]] += err * b[k];
        }
    return weights;
}

void PhongParams::validate() const
{
    if (amb.minCoeff() < 0.0 || dir.minCoeff() < 0.0)
        throw std::invalid_argument("PhongParams: light diagonals must be nonnegative");
    if (std::abs(l.norm() - 1.0) > 1e-9 || std::abs(ve.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("PhongParams: l and ve must be unit vectors");
    if (k_s < 0.0)
        throw std::invalid_argument("PhongParams: specular reflectance must be nonnegative");
    if (nu < 0.0)
        throw std::invalid_argument("PhongParams: shininess exponent must be nonnegative");
}

std::vector<Vec3> phong_shade(const VertexNormalField& normals, const std::vector<Vec3>& texture,
                              const PhongParams& lighting)
{
    lighting.validate();
    if (normals.size() != texture.size())
        throw std::invalid_argument("phong_shade: normals and texture differ in length");
    std::vector<Vec3> out(normals.size());
    for (size_t i = 0; i < normals.size(); ++i)
    {
        const Vec3& n = normals[i];
        const double n_dot_l = n.dot(lighting.l);
        const double diffuse = std::max(0.0, n_dot_l);
        const Vec3 reflect = 2.0 * n_dot_l * n - lighting.l;
        const double spec_base = std::max(0.0, reflect.dot(lighting.ve));
        const double spec = lighting.k_s * std::pow(spec_base, lighting.nu);
        for (int c = 0; c < 3; ++c)
        {
            const double v = lighting.amb[c] * texture[i][c] +
                             lighting.dir[c] * texture[i][c] * diffuse + lighting.dir[c] * spec;
            out[i][c] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

std::vector<Vec3> phong_shade(const Mesh& mesh, const std::vector<Vec3>& texture,
                              const PhongParams& lighting)
{
    return phong_shade(compute_vertex_normals(mesh), texture, lighting);
}

} // namespace facekit
