/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/registration.cpp
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
#include "facekit/registration.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace facekit {

PointCloud backproject_depth(const RGBDFrame& frame)
{
    const int w = frame.width();
    const int h = frame.height();
    if (frame.valid.width() != w || frame.valid.height() != h)
        throw std::invalid_argument("backproject_depth: mask and depth dimensions differ");
    PointCloud cloud;
    cloud.index_map = Image<int>(w, h, -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
        {
            if (!frame.valid.at(x, y))
                continue;
            cloud.index_map.at(x, y) = static_cast<int>(cloud.points.size());
            cloud.points.emplace_back(x, y, frame.depth.at(x, y));
            const bool interior = x > 0 && x < w - 1 && y > 0 && y < h - 1 &&
                                  frame.valid.at(x - 1, y) && frame.valid.at(x + 1, y) &&
                                  frame.valid.at(x, y - 1) && frame.valid.at(x, y + 1);
            if (interior)
            {
                const double zx = 0.5 * (frame.depth.at(x + 1, y) - frame.depth.at(x - 1, y));
                const double zy = 0.5 * (frame.depth.at(x, y + 1) - frame.depth.at(x, y - 1));
                cloud.normals.push_back(Vec3(-zx, -zy, 1.0).normalized());
                cloud.has_normal.push_back(1);
            }
            else
            {
                cloud.normals.push_back(Vec3::Zero());
                cloud.has_normal.push_back(0);
            }
        }
    if (cloud.points.empty())
        throw std::runtime_error("backproject_depth: validity mask is empty");
    return cloud;
}

std::vector<Vec2> contour_correspondence(const std::vector<Vec2>& points,
                                         const std::vector<Vec2>& curve)
{
    if (curve.size() < 2)
        throw std::invalid_argument("contour_correspondence: polyline needs at least 2 points");
    std::vector<Vec2> matched(points.size());
    for (size_t i = 0; i < points.size(); ++i)
    {
        const Vec2& p = points[i];
        double best_d = std::numeric_limits<double>::infinity();
        Vec2 best = curve.front();
        for (size_t s = 0; s + 1 < curve.size(); ++s)
        {
            const Vec2& a = curve[s];
            const Vec2& b = curve[s + 1];
            const Vec2 ab = b - a;
            const double len_sq = ab.squaredNorm();
            const double t =
                len_sq > 0.0 ? std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0) : 0.0;
            const Vec2 q = a + t * ab;
            const double d = (p - q).squaredNorm();
            if (d < best_d)
            {
                best_d = d;
                best = q;
            }
        }
        matched[i] = best;
    }
    return matched;
}

std::vector<int> select_contour_vertices(const Mesh& mesh, const CameraPose& pose,
                                         const std::vector<int>& band)
{
    std::vector<Vec2> projected(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        projected[i] = pose.apply(mesh.vertices[i]).head<2>();

    std::vector<double> area(mesh.triangles.size());
    for (size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        const auto& tri = mesh.triangles[t];
        const Vec2 e1 = projected[tri[1]] - projected[tri[0]];
        const Vec2 e2 = projected[tri[2]] - projected[tri[0]];
        area[t] = e1.x() * e2.y() - e1.y() * e2.x();
    }

    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    for (size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e)
        {
            const int a = tri[e], b = tri[(e + 1) % 3];
            edge_tris[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(t));
        }
    }

    std::vector<uint8_t> selected(mesh.vertices.size(), 0);
    for (const auto& [edge, tris] : edge_tris)
    {
        if (tris.size() != 2)
            continue;
        if (area[tris[0]] * area[tris[1]] < 0.0)
        {
            selected[edge.first] = 1;
            selected[edge.second] = 1;
        }
    }
    if (!band.empty())
    {
        std::vector<uint8_t> in_band(mesh.vertices.size(), 0);
        for (const int v : band)
            in_band[v] = 1;
        for (size_t i = 0; i < selected.size(); ++i)
            selected[i] &= in_band[i];
    }
    std::vector<int> out;
    for (size_t i = 0; i < selected.size(); ++i)
        if (selected[i])
            out.push_back(static_cast<int>(i));
    return out;
}

namespace {

struct Correspondence
{
    int vertex = -1;
    Vec3 target = Vec3::Zero();
};

// Gated closest point into the organized depth cloud, searched over the
// pixel window that can contain matches within the distance gate.
std::vector<Correspondence> find_data_pairs(const std::vector<Vec3>& positions,
                                            const VertexNormalField& normals,
                                            const PointCloud& cloud, double gate_distance,
                                            double gate_cos, double min_visibility,
                                            int pixel_window,
                                            const std::vector<uint8_t>& eligible)
{
    std::vector<Correspondence> pairs;
    const int w = cloud.index_map.width();
    const int h = cloud.index_map.height();
    for (size_t i = 0; i < positions.size(); ++i)
    {
        if (!eligible.empty() && !eligible[i])
            continue;
        // A single view constrains only camera-facing surface; vertices
        // turned away must not be dragged onto the silhouette rim.
        if (normals[i].z() < min_visibility)
            continue;
        const Vec3& p = positions[i];
        const int cx = static_cast<int>(std::lround(p.x()));
        const int cy = static_cast<int>(std::lround(p.y()));
        // Projective association: the candidate is the cloud point directly
        // under the vertex, widening ring by ring only while that pixel is
        // invalid. Choosing by pixel distance rather than 3D distance keeps
        // oblique surfaces from dragging vertices along the slope.
        int best = -1;
        for (int ring = 0; ring <= pixel_window && best < 0; ++ring)
        {
            double best_px = std::numeric_limits<double>::infinity();
            for (int y = std::max(0, cy - ring); y <= std::min(h - 1, cy + ring); ++y)
                for (int x = std::max(0, cx - ring); x <= std::min(w - 1, cx + ring); ++x)
                {
                    if (std::max(std::abs(x - cx), std::abs(y - cy)) != ring)
                        continue;
                    const int idx = cloud.index_map.at(x, y);
                    if (idx < 0 || !cloud.has_normal[idx])
                        continue;
                    const double dpx = (p.x() - x) * (p.x() - x) + (p.y() - y) * (p.y() - y);
                    if (dpx >= best_px)
                        continue;
                    const Vec3& q = cloud.points[idx];
                    if ((q - p).norm() > gate_distance)
                        continue;
                    if (cloud.normals[idx].dot(normals[i]) < gate_cos)
                        continue;
                    best_px = dpx;
                    best = idx;
                }
        }
        if (best >= 0)
            pairs.push_back({static_cast<int>(i), cloud.points[best]});
    }
    return pairs;
}

} // namespace

NicpResult nonrigid_icp(const Mesh& template_mesh, const RGBDFrame& frame,
                        const LandmarkSet& landmarks, const NicpOptions& options)
{
    const int n = template_mesh.vertex_count();
    if (n == 0 || template_mesh.triangles.empty())
        throw std::invalid_argument("nonrigid_icp: empty template");
    for (const auto& lm : landmarks.edge_points)
        if (lm.vertex_id < 0 || lm.vertex_id >= n)
            throw std::invalid_argument("nonrigid_icp: landmark vertex id out of range");

    const PointCloud cloud = backproject_depth(frame);
    const auto edges = mesh_edges(template_mesh);
    const double gate_cos = std::cos(options.gate_normal_deg * M_PI / 180.0);

    // Template coordinates are centered for the homogeneous blocks; the
    // returned affines are mapped back to the raw convention at the end.
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : template_mesh.vertices)
        centroid += v;
    centroid /= n;
    std::vector<Eigen::Vector4d> hom(n);
    for (int i = 0; i < n; ++i)
    {
        const Vec3 c = template_mesh.vertices[i] - centroid;
        hom[i] = Eigen::Vector4d(c.x(), c.y(), c.z(), 1.0);
    }

    // Unknowns: per-vertex 4x3 blocks X_i, stacked; position_i = X_i^T * hom_i.
    // Identity transform in centered coordinates: X_i^T hom = (v - centroid) + centroid = v.
    Eigen::MatrixXd x_cur(4 * n, 3);
    for (int i = 0; i < n; ++i)
    {
        x_cur.block<4, 3>(4 * i, 0).setZero();
        x_cur.block<3, 3>(4 * i, 0).setIdentity();
        x_cur.row(4 * i + 3) = centroid.transpose();
    }
    auto deformed_positions = [&](const Eigen::MatrixXd& x) {
        std::vector<Vec3> pos(n);
        for (int i = 0; i < n; ++i)
            pos[i] = (x.block<4, 3>(4 * i, 0).transpose() * hom[i]);
        return pos;
    };

    NicpResult result;
    std::vector<int> prev_active;

    for (const double stiffness : options.stiffness_schedule)
    {
        if (!(stiffness > 0.0))
            throw std::invalid_argument("nonrigid_icp: stiffness must be positive");
        // Within one stiffness level the active data set may only shrink,
        // a vertex's target is replaced only when the replacement is closer,
        // and the contour vertex list is frozen: each inner solve is a
        // global minimum, re-correspondence only lowers per-pair costs, and
        // dropped pairs remove nonnegative terms, so the level's energy
        // trace is non-increasing by construction. Gating events are logged.
        std::vector<uint8_t> level_eligible;
        std::vector<int> contour_vertices;
        std::vector<Correspondence> held(n);
        for (int round = 0; round < options.inner_rounds; ++round)
        {
            const std::vector<Vec3> positions = deformed_positions(x_cur);
            Mesh deformed = template_mesh;
            deformed.vertices = positions;
            const VertexNormalField def_normals = compute_vertex_normals(deformed);

            std::vector<Correspondence> data_pairs =
                find_data_pairs(positions, def_normals, cloud, options.gate_distance,
                                gate_cos, options.min_visibility, options.pixel_window,
                                level_eligible);
            if (round > 0)
                for (auto& pair : data_pairs)
                {
                    const Correspondence& old = held[pair.vertex];
                    if (old.vertex >= 0 &&
                        (positions[pair.vertex] - old.target).squaredNorm() <
                            (positions[pair.vertex] - pair.target).squaredNorm())
                        pair.target = old.target;
                }
            if (data_pairs.empty())
                throw std::runtime_error("nonrigid_icp: no valid depth under the face");
            level_eligible.assign(n, 0);
            std::fill(held.begin(), held.end(), Correspondence{});
            for (const auto& pair : data_pairs)
            {
                level_eligible[pair.vertex] = 1;
                held[pair.vertex] = pair;
            }

            std::vector<Vec2> contour_targets;
            if (!landmarks.contour.empty() && options.w_cont > 0.0)
            {
                if (round == 0)
                {
                    contour_vertices =
                        select_contour_vertices(deformed, CameraPose{}, options.contour_band);
                    // Keep the camera-facing member of each fold edge: the
                    // 2D curve constrains the visible outline, not the
                    // surface folding away behind it.
                    std::erase_if(contour_vertices,
                                  [&](int v) { return def_normals[v].z() < 0.0; });
                }
                std::vector<Vec2> projected;
                projected.reserve(contour_vertices.size());
                for (const int v : contour_vertices)
                    projected.push_back(positions[v].head<2>());
                if (!projected.empty())
                    contour_targets = contour_correspondence(projected, landmarks.contour);
            }

            // Shared (3-column) equations: data + stiffness. 2D equations
            // (edge + contour) touch only the x and y columns.
            std::vector<Eigen::Triplet<double>> trip_common, trip_2d;
            std::vector<double> rhs_cx, rhs_cy, rhs_cz, rhs_2x, rhs_2y;
            int row_c = 0, row_2 = 0;
            const double sw_data = std::sqrt(options.w_data);
            for (const auto& pair : data_pairs)
            {
                for (int k = 0; k < 4; ++k)
                    trip_common.emplace_back(row_c, 4 * pair.vertex + k,
                                             sw_data * hom[pair.vertex][k]);
                rhs_cx.push_back(sw_data * pair.target.x());
                rhs_cy.push_back(sw_data * pair.target.y());
                rhs_cz.push_back(sw_data * pair.target.z());
                ++row_c;
            }
            const double sw_stiff = std::sqrt(stiffness);
            for (const auto& edge : edges)
                for (int k = 0; k < 4; ++k)
                {
                    trip_common.emplace_back(row_c, 4 * edge[0] + k, sw_stiff);
                    trip_common.emplace_back(row_c, 4 * edge[1] + k, -sw_stiff);
                    rhs_cx.push_back(0.0);
                    rhs_cy.push_back(0.0);
                    rhs_cz.push_back(0.0);
                    ++row_c;
                }
            const double sw_edge = std::sqrt(options.w_edge);
            if (options.w_edge > 0.0)
                for (const auto& lm : landmarks.edge_points)
                {
                    for (int k = 0; k < 4; ++k)
                        trip_2d.emplace_back(row_2, 4 * lm.vertex_id + k,
                                             sw_edge * hom[lm.vertex_id][k]);
                    rhs_2x.push_back(sw_edge * lm.xy.x());
                    rhs_2y.push_back(sw_edge * lm.xy.y());
                    ++row_2;
                }
            const double sw_cont = std::sqrt(options.w_cont);
            for (size_t c = 0; c < contour_vertices.size(); ++c)
            {
                const int v = contour_vertices[c];
                for (int k = 0; k < 4; ++k)
                    trip_2d.emplace_back(row_2, 4 * v + k, sw_cont * hom[v][k]);
                rhs_2x.push_back(sw_cont * contour_targets[c].x());
                rhs_2y.push_back(sw_cont * contour_targets[c].y());
                ++row_2;
            }

            Eigen::SparseMatrix<double> m_common(row_c, 4 * n), m_2d(row_2, 4 * n);
            m_common.setFromTriplets(trip_common.begin(), trip_common.end());
            m_2d.setFromTriplets(trip_2d.begin(), trip_2d.end());
            const Eigen::SparseMatrix<double> gram_common =
                Eigen::SparseMatrix<double>(m_common.transpose()) * m_common;
            Eigen::SparseMatrix<double> gram_xy = gram_common;
            if (row_2 > 0)
                gram_xy = gram_common + Eigen::SparseMatrix<double>(m_2d.transpose()) * m_2d;

            auto map_vec = [](const std::vector<double>& v) {
                return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
            };
            Eigen::VectorXd rhs_x = m_common.transpose() * map_vec(rhs_cx);
            Eigen::VectorXd rhs_y = m_common.transpose() * map_vec(rhs_cy);
            const Eigen::VectorXd rhs_z = m_common.transpose() * map_vec(rhs_cz);
            if (row_2 > 0)
            {
                rhs_x += m_2d.transpose() * map_vec(rhs_2x);
                rhs_y += m_2d.transpose() * map_vec(rhs_2y);
            }

            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_xy(gram_xy);
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_z(gram_common);
            if (solver_xy.info() != Eigen::Success || solver_z.info() != Eigen::Success)
                throw std::runtime_error("nonrigid_icp: singular normal equations at stiffness " +
                                         std::to_string(stiffness) + ", round " +
                                         std::to_string(round));
            x_cur.col(0) = solver_xy.solve(rhs_x);
            x_cur.col(1) = solver_xy.solve(rhs_y);
            x_cur.col(2) = solver_z.solve(rhs_z);

            // Energies of the just-solved problem, with this round's correspondences.
            NicpIteration it;
            it.stiffness = stiffness;
            it.round = round;
            const std::vector<Vec3> new_pos = deformed_positions(x_cur);
            for (const auto& pair : data_pairs)
                it.e_data += options.w_data * (new_pos[pair.vertex] - pair.target).squaredNorm();
            for (const auto& edge : edges)
                it.e_smooth += stiffness * (x_cur.block<4, 3>(4 * edge[0], 0) -
                                            x_cur.block<4, 3>(4 * edge[1], 0))
                                               .squaredNorm();
            for (const auto& lm : landmarks.edge_points)
                if (options.w_edge > 0.0)
                    it.e_edge += options.w_edge *
                                 (new_pos[lm.vertex_id].head<2>() - lm.xy).squaredNorm();
            for (size_t c = 0; c < contour_vertices.size(); ++c)
                it.e_cont += options.w_cont *
                             (new_pos[contour_vertices[c]].head<2>() - contour_targets[c])
                                 .squaredNorm();
            it.e_total = it.e_data + it.e_smooth + it.e_edge + it.e_cont;
            it.active_pairs = static_cast<int>(data_pairs.size());
            std::vector<int> active;
            active.reserve(data_pairs.size());
            for (const auto& pair : data_pairs)
                active.push_back(pair.vertex);
            it.gating_changed = !prev_active.empty() && active != prev_active;
            prev_active = std::move(active);
            result.trace.push_back(it);
        }
    }

    result.registered = template_mesh;
    result.registered.vertices = deformed_positions(x_cur);
    result.transforms.resize(n);
    for (int i = 0; i < n; ++i)
    {
        const Eigen::Matrix<double, 3, 4> centered = x_cur.block<4, 3>(4 * i, 0).transpose();
        Eigen::Matrix<double, 3, 4> raw = centered;
        raw.col(3) = centered.col(3) - centered.leftCols<3>() * centroid;
        result.transforms[i] = raw;
    }
    return result;
}

} // namespace facekit
