/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/augmentation.cpp
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
#include "facekit/augmentation.hpp"

#include "background_mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

namespace facekit {

namespace {

bool graph_connected(int n, const std::vector<std::array<int, 2>>& edges)
{
    if (n == 0)
        return false;
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : edges)
    {
        adj[e[0]].push_back(e[1]);
        adj[e[1]].push_back(e[0]);
    }
    std::vector<uint8_t> seen(n, 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int count = 1;
    while (!queue.empty())
    {
        const int v = queue.front();
        queue.pop_front();
        for (const int w : adj[v])
            if (!seen[w])
            {
                seen[w] = 1;
                ++count;
                queue.push_back(w);
            }
    }
    return count == n;
}

} // namespace

AnchorGraph build_anchor_graph(int width, int height, const Mesh& face_in_image, int spacing,
                               const RGBDFrame* frame)
{
    const detail::BackgroundMeshing meshing =
        detail::mesh_background(width, height, face_in_image, spacing);
    AnchorGraph graph;
    graph.contour_count = static_cast<int>(meshing.ring_vids.size());
    graph.contour_vids = meshing.ring_vids;
    auto push_node = [&](const Vec2& xy) {
        AnchorGraph::Anchor a;
        a.xy = xy;
        if (frame)
        {
            const int px = static_cast<int>(std::lround(xy.x()));
            const int py = static_cast<int>(std::lround(xy.y()));
            if (frame->valid.contains(px, py) && frame->valid.at(px, py))
            {
                a.valid = true;
                a.depth = frame->depth.at(px, py);
            }
        }
        graph.anchors.push_back(a);
    };
    for (const int v : meshing.ring_vids)
        push_node(face_in_image.vertices[v].head<2>());
    for (const Vec2& p : meshing.anchor_positions)
        push_node(p);

    std::set<std::pair<int, int>> edge_set;
    for (const auto& tri : meshing.triangles)
        for (int e = 0; e < 3; ++e)
        {
            const int a = tri[e], b = tri[(e + 1) % 3];
            edge_set.insert({std::min(a, b), std::max(a, b)});
        }
    for (const auto& [a, b] : edge_set)
        graph.edges.push_back({a, b});
    return graph;
}

std::vector<double> solve_anchor_depths(const AnchorGraph& graph, double smooth_weight)
{
    const int n = static_cast<int>(graph.anchors.size());
    if (n == 0)
        throw std::invalid_argument("solve_anchor_depths: empty graph");
    for (const auto& e : graph.edges)
        if (e[0] < 0 || e[0] >= n || e[1] < 0 || e[1] >= n)
            throw std::invalid_argument("solve_anchor_depths: edge endpoint out of range");
    if (!graph_connected(n, graph.edges))
        throw std::runtime_error("solve_anchor_depths: anchor graph is disconnected");
    if (smooth_weight < 0.0)
        throw std::invalid_argument("solve_anchor_depths: negative smoothness weight");

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    bool any_valid = false;
    for (int i = 0; i < n; ++i)
        if (graph.anchors[i].valid)
        {
            trips.emplace_back(i, i, 1.0);
            rhs[i] += graph.anchors[i].depth;
            any_valid = true;
        }
    if (!any_valid)
        throw std::runtime_error("solve_anchor_depths: no anchor carries a depth observation");
    for (const auto& e : graph.edges)
    {
        trips.emplace_back(e[0], e[0], smooth_weight);
        trips.emplace_back(e[1], e[1], smooth_weight);
        trips.emplace_back(e[0], e[1], -smooth_weight);
        trips.emplace_back(e[1], e[0], -smooth_weight);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("solve_anchor_depths: factorization failed");
    const Eigen::VectorXd d = solver.solve(rhs);
    return {d.data(), d.data() + n};
}

namespace {

// Scanline hole fill: each uncovered pixel takes the nearest covered value
// on its row (falling back to the column, then a constant).
void fill_holes(Image<double>& depth, double fallback)
{
    const int w = depth.width(), h = depth.height();
    for (int y = 0; y < h; ++y)
    {
        double last = std::numeric_limits<double>::quiet_NaN();
        for (int x = 0; x < w; ++x)
        {
            if (std::isfinite(depth.at(x, y)))
                last = depth.at(x, y);
            else if (std::isfinite(last))
                depth.at(x, y) = last;
        }
        last = std::numeric_limits<double>::quiet_NaN();
        for (int x = w - 1; x >= 0; --x)
        {
            if (std::isfinite(depth.at(x, y)))
                last = depth.at(x, y);
            else if (std::isfinite(last))
                depth.at(x, y) = last;
        }
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (!std::isfinite(depth.at(x, y)))
                depth.at(x, y) = fallback;
}

} // namespace

Image<double> complete_depth(const RGBDFrame& frame, const Mesh& registered_face,
                             int anchor_spacing, double smooth_weight)
{
    const int w = frame.width();
    const int h = frame.height();
    const detail::BackgroundMeshing meshing =
        detail::mesh_background(w, h, registered_face, anchor_spacing);

    AnchorGraph graph = build_anchor_graph(w, h, registered_face, anchor_spacing, &frame);
    // The face boundary ring takes its depth from the registered face, not
    // the raw frame: the face region is authoritative.
    for (int i = 0; i < graph.contour_count; ++i)
    {
        graph.anchors[i].valid = true;
        graph.anchors[i].depth = registered_face.vertices[meshing.ring_vids[i]].z();
    }
    const std::vector<double> depths = solve_anchor_depths(graph, smooth_weight);

    Mesh combined = registered_face;
    combined.colors.clear();
    combined.uv.clear();
    const int face_count = registered_face.vertex_count();
    const int n_ring = static_cast<int>(meshing.ring_vids.size());
    for (size_t i = 0; i < meshing.anchor_positions.size(); ++i)
    {
        const Vec2& p = meshing.anchor_positions[i];
        combined.vertices.emplace_back(p.x(), p.y(), depths[n_ring + i]);
    }
    auto remap = [&](int idx) {
        return idx < n_ring ? meshing.ring_vids[idx] : face_count + (idx - n_ring);
    };
    for (const auto& tri : meshing.triangles)
        combined.triangles.push_back({remap(tri[0]), remap(tri[1]), remap(tri[2])});

    const std::vector<Vec3> dummy(combined.vertices.size(), Vec3::Zero());
    const RenderBuffer buf = rasterize(combined, CameraPose{}, dummy, w, h);
    Image<double> dense = buf.depth;

    // Exact face depth wherever the face itself covers the pixel.
    const std::vector<Vec3> dummy_face(registered_face.vertices.size(), Vec3::Zero());
    const RenderBuffer face_buf = rasterize(registered_face, CameraPose{}, dummy_face, w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (face_buf.is_foreground(x, y))
                dense.at(x, y) = face_buf.depth.at(x, y);

    double mean_anchor = 0.0;
    for (const double d : depths)
        mean_anchor += d;
    mean_anchor /= static_cast<double>(depths.size());
    fill_holes(dense, mean_anchor);
    return dense;
}

TextureParams fit_texture(const ImageRGB& image, const Mesh& registered,
                          const MorphableModel& model, const TextureFitOptions& options)
{
    const int n = model.vertex_count();
    if (registered.vertex_count() != n)
        throw std::invalid_argument("fit_texture: mesh does not match model vertex count");
    const int k = static_cast<int>(model.tex_basis.cols());

    const VertexNormalField normals = compute_vertex_normals(registered);
    Eigen::VectorXd observed(3 * n);
    for (int i = 0; i < n; ++i)
    {
        const Vec3 c =
            sample_bilinear(image, registered.vertices[i].x(), registered.vertices[i].y());
        observed.segment<3>(3 * i) = c;
    }

    TextureParams params;
    params.beta = Eigen::VectorXd::Zero(k);
    params.phong.amb = Vec3::Ones();
    params.phong.dir = Vec3::Zero();
    params.phong.l = Vec3(0, 0, 1);
    params.phong.ve = Vec3(0, 0, 1);
    params.phong.k_s = 0.0;
    params.phong.nu = 2.0;

    auto model_colors = [&](const TextureParams& p) {
        Eigen::VectorXd colors(3 * n);
        for (int i = 0; i < n; ++i)
        {
            const double ndl = normals[i].dot(p.phong.l);
            const double diffuse = std::max(0.0, ndl);
            const Vec3 reflect = 2.0 * ndl * normals[i] - p.phong.l;
            const double spec =
                p.phong.k_s * std::pow(std::max(0.0, reflect.dot(p.phong.ve)), p.phong.nu);
            for (int c = 0; c < 3; ++c)
            {
                const double t = model.mean_texture[3 * i + c] +
                                 model.tex_basis.row(3 * i + c).dot(p.beta);
                colors[3 * i + c] = p.phong.amb[c] * t + p.phong.dir[c] * t * diffuse +
                                    p.phong.dir[c] * spec;
            }
        }
        return colors;
    };
    auto residual_of = [&](const TextureParams& p) {
        return std::sqrt((model_colors(p) - observed).squaredNorm() / (3.0 * n));
    };

    double best_residual = residual_of(params);
    TextureParams best = params;
    int growth_streak = 0;
    std::vector<double> trace{best_residual};

    for (int iter = 0; iter < options.iterations; ++iter)
    {
        // (a1) closed form for the light diagonals at fixed beta and nonlinear terms.
        {
            Eigen::VectorXd diffuse(n), spec(n), tex(3 * n);
            for (int i = 0; i < n; ++i)
            {
                const double ndl = normals[i].dot(params.phong.l);
                diffuse[i] = std::max(0.0, ndl);
                const Vec3 reflect = 2.0 * ndl * normals[i] - params.phong.l;
                spec[i] = std::pow(std::max(0.0, reflect.dot(params.phong.ve)), params.phong.nu);
                for (int c = 0; c < 3; ++c)
                    tex[3 * i + c] = model.mean_texture[3 * i + c] +
                                     model.tex_basis.row(3 * i + c).dot(params.beta);
            }
            for (int c = 0; c < 3; ++c)
            {
                Eigen::Matrix2d gram = Eigen::Matrix2d::Zero();
                Eigen::Vector2d proj = Eigen::Vector2d::Zero();
                for (int i = 0; i < n; ++i)
                {
                    const Eigen::Vector2d row(tex[3 * i + c],
                                              tex[3 * i + c] * diffuse[i] +
                                                  params.phong.k_s * spec[i]);
                    gram += row * row.transpose();
                    proj += row * observed[3 * i + c];
                }
                gram += 1e-12 * Eigen::Matrix2d::Identity();
                const Eigen::Vector2d sol = gram.ldlt().solve(proj);
                params.phong.amb[c] = std::max(0.0, sol[0]);
                params.phong.dir[c] = std::max(0.0, sol[1]);
            }
        }
        // (a2) closed form for beta at fixed lights.
        {
            Eigen::MatrixXd m(3 * n, k);
            Eigen::VectorXd r(3 * n);
            for (int i = 0; i < n; ++i)
            {
                const double ndl = normals[i].dot(params.phong.l);
                const double diffuse = std::max(0.0, ndl);
                const Vec3 reflect = 2.0 * ndl * normals[i] - params.phong.l;
                const double spec = params.phong.k_s *
                                    std::pow(std::max(0.0, reflect.dot(params.phong.ve)),
                                             params.phong.nu);
                for (int c = 0; c < 3; ++c)
                {
                    const double gain = params.phong.amb[c] + params.phong.dir[c] * diffuse;
                    m.row(3 * i + c) = gain * model.tex_basis.row(3 * i + c);
                    r[3 * i + c] = observed[3 * i + c] -
                                   gain * model.mean_texture[3 * i + c] -
                                   params.phong.dir[c] * spec;
                }
            }
            Eigen::MatrixXd gram = m.transpose() * m;
            gram += 1e-12 * Eigen::MatrixXd::Identity(k, k);
            params.beta = gram.ldlt().solve(m.transpose() * r);
        }
        // (b) finite-difference gradient step on l, k_s, nu with backtracking.
        {
            const double base = residual_of(params);
            const double fd = 1e-4;
            Eigen::VectorXd grad(5);
            for (int d = 0; d < 5; ++d)
            {
                TextureParams plus = params;
                TextureParams minus = params;
                if (d < 3)
                {
                    plus.phong.l[d] += fd;
                    minus.phong.l[d] -= fd;
                    plus.phong.l.normalize();
                    minus.phong.l.normalize();
                }
                else if (d == 3)
                {
                    plus.phong.k_s += fd;
                    minus.phong.k_s = std::max(0.0, minus.phong.k_s - fd);
                }
                else
                {
                    plus.phong.nu += fd;
                    minus.phong.nu = std::max(0.0, minus.phong.nu - fd);
                }
                grad[d] = (residual_of(plus) - residual_of(minus)) / (2.0 * fd);
            }
            double scale = options.step;
            for (int bt = 0; bt < 8; ++bt)
            {
                TextureParams trial = params;
                trial.phong.l -= scale * grad.head<3>();
                if (trial.phong.l.norm() < 1e-9)
                    trial.phong.l = params.phong.l;
                trial.phong.l.normalize();
                trial.phong.k_s = std::max(0.0, trial.phong.k_s - scale * grad[3]);
                trial.phong.nu = std::max(0.0, trial.phong.nu - scale * grad[4]);
                if (residual_of(trial) < base)
                {
                    params = trial;
                    break;
                }
                scale *= 0.5;
            }
        }

        const double res = residual_of(params);
        trace.push_back(res);
        if (res < best_residual)
        {
            best_residual = res;
            best = params;
            growth_streak = 0;
        }
        else if (res > trace[trace.size() - 2])
        {
            if (++growth_streak >= 5)
            {
                std::string msg = "fit_texture: diverging residual trace:";
                for (const double t : trace)
                    msg += " " + std::to_string(t);
                throw std::runtime_error(msg);
            }
        }
        else
        {
            growth_streak = 0;
        }
    }
    return best;
}

double texture_fit_residual(const ImageRGB& image, const Mesh& registered,
                            const MorphableModel& model, const TextureParams& params)
{
    const int n = model.vertex_count();
    const VertexNormalField normals = compute_vertex_normals(registered);
    const std::vector<Vec3> tex = evaluate_texture(model, params.beta);
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const Vec3 observed =
            sample_bilinear(image, registered.vertices[i].x(), registered.vertices[i].y());
        const double ndl = normals[i].dot(params.phong.l);
        const double diffuse = std::max(0.0, ndl);
        const Vec3 reflect = 2.0 * ndl * normals[i] - params.phong.l;
        const double spec = params.phong.k_s *
                            std::pow(std::max(0.0, reflect.dot(params.phong.ve)), params.phong.nu);
        for (int c = 0; c < 3; ++c)
        {
            const double v = params.phong.amb[c] * tex[i][c] +
                             params.phong.dir[c] * tex[i][c] * diffuse +
                             params.phong.dir[c] * spec;
            sum += (v - observed[c]) * (v - observed[c]);
        }
    }
    return std::sqrt(sum / (3.0 * n));
}

ImageRGB poisson_blend(const ImageRGB& target, const ImageRGB& source,
                       const Image<uint8_t>& mask)
{
    const int w = target.width(), h = target.height();
    if (source.width() != w || source.height() != h || mask.width() != w || mask.height() != h)
        throw std::invalid_argument("poisson_blend: image dimensions differ");

    std::vector<int> index(static_cast<size_t>(w) * h, -1);
    std::vector<std::pair<int, int>> pixels;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.at(x, y))
            {
                if (x == 0 || y == 0 || x == w - 1 || y == h - 1)
                    throw std::invalid_argument(
                        "poisson_blend: mask must be strictly inside the image");
                index[static_cast<size_t>(y) * w + x] = static_cast<int>(pixels.size());
                pixels.emplace_back(x, y);
            }
    if (pixels.empty())
        return target;

    const int m = static_cast<int>(pixels.size());
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 3);
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int i = 0; i < m; ++i)
    {
        const auto [x, y] = pixels[i];
        trips.emplace_back(i, i, 4.0);
        for (int d = 0; d < 4; ++d)
        {
            const int nx = x + dx[d], ny = y + dy[d];
            const Vec3 grad = source.at(x, y) - source.at(nx, ny);
            rhs.row(i) += grad.transpose();
            const int j = index[static_cast<size_t>(ny) * w + nx];
            if (j >= 0)
                trips.emplace_back(i, j, -1.0);
            else
                rhs.row(i) += target.at(nx, ny).transpose();
        }
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("poisson_blend: factorization failed");
    ImageRGB out = target;
    for (int c = 0; c < 3; ++c)
    {
        const Eigen::VectorXd sol = solver.solve(rhs.col(c));
        for (int i = 0; i < m; ++i)
            out.at(pixels[i].first, pixels[i].second)[c] = sol[i];
    }
    return out;
}

RotatedRender rotate_and_render(const RGBDFrame& frame, const Mesh& registered,
                                const Image<double>& dense_depth, const CameraPose& target_pose,
                                const TextureParams& tex, const MorphableModel& model,
                                const RotateRenderOptions& options)
{
    const int w = frame.width(), h = frame.height();
    if (dense_depth.width() != w || dense_depth.height() != h)
        throw std::invalid_argument("rotate_and_render: dense depth does not cover the image");

    // Pixel lattice padded past the border so rotations keep full coverage.
    std::vector<double> xs, ys;
    const int margin = static_cast<int>(0.6 * std::max(w, h));
    for (int v = -margin; v < 0; v += options.pad_spacing)
        xs.push_back(v);
    for (int v = 0; v < w; ++v)
        xs.push_back(v);
    for (int v = w - 1 + options.pad_spacing; v <= w - 1 + margin; v += options.pad_spacing)
        xs.push_back(v);
    for (int v = -margin; v < 0; v += options.pad_spacing)
        ys.push_back(v);
    for (int v = 0; v < h; ++v)
        ys.push_back(v);
    for (int v = h - 1 + options.pad_spacing; v <= h - 1 + margin; v += options.pad_spacing)
        ys.push_back(v);

    const int nx = static_cast<int>(xs.size());
    const int ny = static_cast<int>(ys.size());
    Mesh lattice;
    lattice.vertices.reserve(static_cast<size_t>(nx) * ny);
    std::vector<Vec3> colors(static_cast<size_t>(nx) * ny);
    std::vector<double> occluded(static_cast<size_t>(nx) * ny, 0.0);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix)
        {
            const double x = xs[ix], y = ys[iy];
            const double depth = sample_bilinear(dense_depth, x, y);
            lattice.vertices.emplace_back(x, y, depth);
            colors[static_cast<size_t>(iy) * nx + ix] = sample_bilinear(frame.color, x, y);
            const int px = static_cast<int>(std::lround(std::clamp(x, 1.0, w - 2.0)));
            const int py = static_cast<int>(std::lround(std::clamp(y, 1.0, h - 2.0)));
            const bool in_frame = x >= 0 && x <= w - 1 && y >= 0 && y <= h - 1;
            if (in_frame)
            {
                const double zx =
                    0.5 * (dense_depth.at(px + 1, py) - dense_depth.at(px - 1, py));
                const double zy =
                    0.5 * (dense_depth.at(px, py + 1) - dense_depth.at(px, py - 1));
                const double n_z = 1.0 / std::sqrt(1.0 + zx * zx + zy * zy);
                if (n_z < options.occlusion_threshold)
                    occluded[static_cast<size_t>(iy) * nx + ix] = 1.0;
            }
        }
    for (int iy = 0; iy + 1 < ny; ++iy)
        for (int ix = 0; ix + 1 < nx; ++ix)
        {
            const int v00 = iy * nx + ix;
            const int v01 = iy * nx + ix + 1;
            const int v10 = (iy + 1) * nx + ix;
            const int v11 = (iy + 1) * nx + ix + 1;
            lattice.triangles.push_back({v00, v10, v01});
            lattice.triangles.push_back({v10, v11, v01});
        }

    const RenderBuffer buf = rasterize(lattice, target_pose, colors, w, h);
    const Image<double> occ_map = interpolate_attribute(buf, occluded, 0.0);

    RotatedRender out;
    out.color = buf.color;
    out.depth = buf.depth;
    out.inpainted = Image<uint8_t>(w, h, 0);

    // Model-texture render of the face at the same pose, for inpainting.
    const std::vector<Vec3> albedo = evaluate_texture(model, tex.beta);
    const std::vector<Vec3> model_colors = phong_shade(registered, albedo, tex.phong);
    const RenderBuffer model_buf = rasterize(registered, target_pose, model_colors, w, h);

    Image<uint8_t> mask(w, h, 0);
    bool any = false;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x)
            if (occ_map.at(x, y) > 0.5 && model_buf.is_foreground(x, y))
            {
                mask.at(x, y) = 1;
                any = true;
            }
    if (any)
    {
        out.color = poisson_blend(out.color, model_buf.color, mask);
        out.inpainted = mask;
    }

    double mean_depth = 0.0;
    int covered = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (buf.is_foreground(x, y))
            {
                mean_depth += buf.depth.at(x, y);
                ++covered;
            }
    fill_holes(out.depth, covered > 0 ? mean_depth / covered : 0.0);
    return out;
}

Mesh fuse_target_shape(const DonorParts& parts, const std::vector<int>& region_labels,
                       int blend_band_hops)
{
    const Mesh* donors[4] = {&parts.cheek, &parts.eyes, &parts.nose, &parts.mouth};
    const int n = parts.cheek.vertex_count();
    for (const Mesh* donor : donors)
        if (donor->vertex_count() != n || donor->triangles != parts.cheek.triangles)
            throw std::invalid_argument("fuse_target_shape: donor topology mismatch");
    if (static_cast<int>(region_labels.size()) != n)
        throw std::invalid_argument("fuse_target_shape: region label count mismatch");
    if (blend_band_hops < 1)
        throw std::invalid_argument("fuse_target_shape: blend band must be at least 1 hop");

    std::vector<std::vector<int>> adj(n);
    for (const auto& e : mesh_edges(parts.cheek))
    {
        adj[e[0]].push_back(e[1]);
        adj[e[1]].push_back(e[0]);
    }

    // Multi-source BFS from region boundaries: distance (in hops) to the
    // nearest vertex of another region, and which region that is.
    std::vector<int> dist(n, std::numeric_limits<int>::max());
    std::vector<int> other(n, -1);
    std::deque<int> queue;
    for (int i = 0; i < n; ++i)
    {
        int best_other = -1;
        for (const int j : adj[i])
            if (region_labels[j] != region_labels[i])
            {
                best_other = best_other < 0 ? region_labels[j]
                                            : std::min(best_other, region_labels[j]);
            }
        if (best_other >= 0)
        {
            dist[i] = 1;
            other[i] = best_other;
            queue.push_back(i);
        }
    }
    while (!queue.empty())
    {
        const int v = queue.front();
        queue.pop_front();
        for (const int j : adj[v])
            if (region_labels[j] == region_labels[v] && dist[v] + 1 < dist[j])
            {
                dist[j] = dist[v] + 1;
                other[j] = other[v];
                queue.push_back(j);
            }
    }

    Mesh out = parts.cheek;
    for (int i = 0; i < n; ++i)
    {
        const Vec3& own = donors[region_labels[i]]->vertices[i];
        if (other[i] < 0 || dist[i] >= blend_band_hops)
        {
            out.vertices[i] = own;
            continue;
        }
        const double t = static_cast<double>(dist[i]) / blend_band_hops;
        const double w_self = 0.5 * (1.0 + t);
        out.vertices[i] = w_self * own + (1.0 - w_self) * donors[other[i]]->vertices[i];
    }
    return out;
}

AnchorGraph warp_background_anchors(const AnchorGraph& source_anchors,
                                    const std::vector<Vec2>& source_contour,
                                    const std::vector<Vec2>& target_contour)
{
    if (source_contour.size() != target_contour.size())
        throw std::invalid_argument("warp_background_anchors: contour lists differ in length");
    const int n = static_cast<int>(source_anchors.anchors.size());
    if (n == 0)
        throw std::invalid_argument("warp_background_anchors: empty graph");
    if (!graph_connected(n, source_anchors.edges))
        throw std::runtime_error("warp_background_anchors: anchor graph is disconnected");

    // Pin the anchor nearest to each source contour point at its target.
    std::vector<double> pin_weight(n, 0.0);
    std::vector<Vec2> pin_target(n, Vec2::Zero());
    for (size_t j = 0; j < source_contour.size(); ++j)
    {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
        {
            const double d = (source_anchors.anchors[i].xy - source_contour[j]).squaredNorm();
            if (d < best_d)
            {
                best_d = d;
                best = i;
            }
        }
        pin_weight[best] += 1.0;
        pin_target[best] += target_contour[j];
    }

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
    for (int i = 0; i < n; ++i)
        if (pin_weight[i] > 0.0)
        {
            trips.emplace_back(i, i, pin_weight[i]);
            rhs.row(i) += pin_target[i].transpose();
        }
    for (const auto& e : source_anchors.edges)
    {
        const Vec2 offset = source_anchors.anchors[e[0]].xy - source_anchors.anchors[e[1]].xy;
        trips.emplace_back(e[0], e[0], 1.0);
        trips.emplace_back(e[1], e[1], 1.0);
        trips.emplace_back(e[0], e[1], -1.0);
        trips.emplace_back(e[1], e[0], -1.0);
        rhs.row(e[0]) += offset.transpose();
        rhs.row(e[1]) -= offset.transpose();
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("warp_background_anchors: factorization failed");

    AnchorGraph out = source_anchors;
    for (int c = 0; c < 2; ++c)
    {
        const Eigen::VectorXd sol = solver.solve(rhs.col(c));
        for (int i = 0; i < n; ++i)
            out.anchors[i].xy[c] = sol[i];
    }
    return out;
}

std::vector<Vec3> adjust_shading(const std::vector<Vec3>& image_colors, const Mesh& source_shape,
                                 const Mesh& target_shape, const TextureParams& tex)
{
    if (source_shape.vertex_count() != target_shape.vertex_count())
        throw std::invalid_argument("adjust_shading: source and target topology mismatch");
    if (image_colors.size() != source_shape.vertices.size())
        throw std::invalid_argument("adjust_shading: color count mismatch");
    // Everything but the normals and reflections comes from the source fit.
    return phong_shade(compute_vertex_normals(target_shape), image_colors, tex.phong);
}

} // namespace facekit
