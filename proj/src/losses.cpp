/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/losses.cpp
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
#include "facekit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace facekit {

namespace {

// Exact nearest neighbor over a uniform grid: rings of cells are scanned
// outward until no unscanned cell can beat the best distance.
class NearestNeighborGrid
{
public:
    explicit NearestNeighborGrid(const std::vector<Vec3>& points) : points_(points)
    {
        if (points.empty())
            throw std::invalid_argument("NearestNeighborGrid: empty point set");
        lo_ = hi_ = points[0];
        for (const Vec3& p : points)
        {
            lo_ = lo_.cwiseMin(p);
            hi_ = hi_.cwiseMax(p);
        }
        const double diag = (hi_ - lo_).norm();
        cell_ = std::max(diag / 40.0, 1e-9);
        for (int d = 0; d < 3; ++d)
            dims_[d] = static_cast<int>((hi_[d] - lo_[d]) / cell_) + 1;
        cells_.resize(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2]);
        for (size_t i = 0; i < points.size(); ++i)
            cells_[cell_index(coord(points[i]))].push_back(static_cast<int>(i));
    }

    int nearest(const Vec3& q) const
    {
        const std::array<int, 3> c = coord(q);
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        const int max_ring = dims_[0] + dims_[1] + dims_[2];
        for (int ring = 0; ring <= max_ring; ++ring)
        {
            // Cells at Chebyshev distance `ring` can contain points no
            // closer than (ring - 1) * cell.
            if (best >= 0 && (ring - 1) * cell_ > std::sqrt(best_d))
                break;
            bool any_cell = false;
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx)
                    {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                            continue;
                        const std::array<int, 3> cc{c[0] + dx, c[1] + dy, c[2] + dz};
                        if (cc[0] < 0 || cc[0] >= dims_[0] || cc[1] < 0 || cc[1] >= dims_[1] ||
                            cc[2] < 0 || cc[2] >= dims_[2])
                            continue;
                        any_cell = true;
                        for (const int i : cells_[cell_index(cc)])
                        {
                            const double d = (points_[i] - q).squaredNorm();
                            if (d < best_d)
                            {
                                best_d = d;
                                best = i;
                            }
                        }
                    }
            if (!any_cell && best >= 0)
                break;
        }
        return best;
    }

private:
    std::array<int, 3> coord(const Vec3& p) const
    {
        std::array<int, 3> c;
        for (int d = 0; d < 3; ++d)
            c[d] = std::clamp(static_cast<int>((p[d] - lo_[d]) / cell_), 0, dims_[d] - 1);
        return c;
    }
    size_t cell_index(const std::array<int, 3>& c) const
    {
        return (static_cast<size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
    }

    const std::vector<Vec3>& points_;
    Vec3 lo_, hi_;
    double cell_ = 1.0;
    int dims_[3] = {1, 1, 1};
    std::vector<std::vector<int>> cells_;
};

// Area-weighted normals that tolerate lone vertices (zero normal instead of
// throwing); pairs without normals are simply never reliable.
std::vector<Vec3> lenient_normals(const Mesh& mesh)
{
    std::vector<Vec3> accum(mesh.vertices.size(), Vec3::Zero());
    for (const auto& tri : mesh.triangles)
    {
        const Vec3 cross = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                               .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        if (0.5 * cross.norm() < 1e-12)
            continue;
        for (int k = 0; k < 3; ++k)
            accum[tri[k]] += cross;
    }
    for (Vec3& n : accum)
    {
        const double norm = n.norm();
        if (norm > 0.0)
            n /= norm;
    }
    return accum;
}

} // namespace

int CorrespondenceSet::reliable_count() const
{
    int count = 0;
    for (const uint8_t r : reliable)
        count += r ? 1 : 0;
    return count;
}

double loss_mse(const Mesh& gt, const Mesh& coarse, const std::vector<Vec3>& delta,
                const VertexWeightMap* weights)
{
    const size_t n = gt.vertices.size();
    if (coarse.vertices.size() != n || delta.size() != n)
        throw std::invalid_argument("loss_mse: vertex counts differ (gt " + std::to_string(n) +
                                    ", coarse " + std::to_string(coarse.vertices.size()) +
                                    ", delta " + std::to_string(delta.size()) + ")");
    if (weights && weights->size() != n)
        throw std::invalid_argument("loss_mse: weight map length mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i)
    {
        const double w = weights ? (*weights)[i] : 1.0;
        sum += w * (gt.vertices[i] - coarse.vertices[i] - delta[i]).squaredNorm();
    }
    return sum;
}

std::vector<Mat3> psd_view_rotations()
{
    std::vector<Mat3> views;
    for (const auto& [pitch, yaw] :
         std::vector<std::pair<double, double>>{{0, 0}, {0, 90}, {0, -90}, {30, 0}, {-30, 0}})
        views.push_back(rotation_pitch_yaw(pitch, yaw));
    return views;
}

PsdResult psd_distance(const Mesh& output, const Mesh& gt, const std::vector<Mat3>& views,
                       int width, int height, const PlasterFraming* framing)
{
    PsdResult result;
    result.framing =
        framing ? *framing : default_plaster_framing({&output, &gt}, width, height);
    for (const Mat3& view : views)
    {
        const RenderBuffer buf_out = render_plaster(output, view, width, height, result.framing);
        const RenderBuffer buf_gt = render_plaster(gt, view, width, height, result.framing);
        Image<double> err(width, height, 0.0);
        double sq_sum = 0.0;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
            {
                // Plaster renders are grayscale; the red channel carries it.
                const double d = buf_out.color.at(x, y)[0] - buf_gt.color.at(x, y)[0];
                err.at(x, y) = std::abs(d);
                sq_sum += d * d;
            }
        result.distance += std::sqrt(sq_sum);
        result.error_maps.push_back(std::move(err));
    }
    return result;
}

VertexWeightMap vgd_weights_raw(const Mesh& output, const Mesh& gt,
                                const std::vector<Mat3>& views, int width, int height,
                                const PlasterFraming* framing)
{
    if (output.vertex_count() != gt.vertex_count())
        throw std::invalid_argument("vgd_weights: topology mismatch");
    const PlasterFraming frame =
        framing ? *framing : default_plaster_framing({&output, &gt}, width, height);
    VertexWeightMap weights(output.vertices.size(), 0.0);
    for (const Mat3& view : views)
    {
        const RenderBuffer buf_out = render_plaster(output, view, width, height, frame);
        const RenderBuffer buf_gt = render_plaster(gt, view, width, height, frame);
        Image<double> err(width, height, 0.0);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                err.at(x, y) = std::abs(buf_out.color.at(x, y)[0] - buf_gt.color.at(x, y)[0]);
        const VertexWeightMap from_out =
            inverse_render(buf_out, err, output.vertex_count());
        const VertexWeightMap from_gt = inverse_render(buf_gt, err, gt.vertex_count());
        for (size_t i = 0; i < weights.size(); ++i)
            weights[i] += from_out[i] + from_gt[i];
    }
    return weights;
}

VertexWeightMap vgd_weights(const Mesh& output, const Mesh& gt, const std::vector<Mat3>& views,
                            int width, int height, const PlasterFraming* framing,
                            const std::vector<uint8_t>& face_region)
{
    VertexWeightMap weights = vgd_weights_raw(output, gt, views, width, height, framing);
    double sum = 0.0;
    int count = 0;
    for (size_t i = 0; i < weights.size(); ++i)
        if (face_region.empty() || face_region[i])
        {
            sum += weights[i];
            ++count;
        }
    if (count == 0)
        throw std::invalid_argument("vgd_weights: empty face region");
    if (sum <= 0.0)
    {
        // Perfect fit: degrade gracefully to plain MSE.
        std::fill(weights.begin(), weights.end(), 1.0);
        return weights;
    }
    const double scale = count / sum;
    for (double& w : weights)
        w *= scale;
    return weights;
}

CorrespondenceSet build_correspondence(const Mesh& template_mesh, const Mesh& gt_scan,
                                       const Mesh& registered, double spatial_tol_mm,
                                       double normal_tol_deg,
                                       const std::vector<uint8_t>& face_region)
{
    const int n = registered.vertex_count();
    if (template_mesh.vertex_count() != n)
        throw std::invalid_argument("build_correspondence: template/registered mismatch");
    if (!face_region.empty() && static_cast<int>(face_region.size()) != n)
        throw std::invalid_argument("build_correspondence: face region mask length mismatch");
    const NearestNeighborGrid grid(gt_scan.vertices);
    const std::vector<Vec3> reg_normals = lenient_normals(registered);
    const std::vector<Vec3> scan_normals = lenient_normals(gt_scan);
    const double cos_tol = std::cos(normal_tol_deg * M_PI / 180.0);

    CorrespondenceSet corr;
    corr.target_index.resize(n);
    corr.reliable.resize(n);
    for (int k = 0; k < n; ++k)
    {
        const int kt = grid.nearest(registered.vertices[k]);
        corr.target_index[k] = kt;
        const double dist = (registered.vertices[k] - gt_scan.vertices[kt]).norm();
        const Vec3& na = reg_normals[k];
        const Vec3& nb = scan_normals[kt];
        const bool normals_ok =
            na.norm() > 0.0 && nb.norm() > 0.0 && na.dot(nb) > cos_tol;
        const bool in_region = face_region.empty() || face_region[k];
        corr.reliable[k] = (dist < spatial_tol_mm && normals_ok && in_region) ? 1 : 0;
    }
    return corr;
}

namespace {

CameraPose align_by_reliable(const Mesh& recon, const Mesh& target,
                             const CorrespondenceSet& corr)
{
    std::vector<Vec3> source, dest;
    for (size_t k = 0; k < corr.reliable.size(); ++k)
        if (corr.reliable[k])
        {
            source.push_back(recon.vertices[k]);
            dest.push_back(target.vertices[corr.target_index[k]]);
        }
    if (source.size() < 3)
        throw std::runtime_error("metric alignment: fewer than 3 reliable pairs");
    return fit_rigid(source, dest);
}

} // namespace

double metric_nme(const Mesh& recon, const Mesh& gt, const CorrespondenceSet& corr, double d)
{
    if (!(d > 0.0))
        throw std::invalid_argument("metric_nme: interocular distance must be positive");
    if (corr.target_index.size() != recon.vertices.size())
        throw std::invalid_argument("metric_nme: correspondence count mismatch");
    const CameraPose pose = align_by_reliable(recon, gt, corr);
    double sum = 0.0;
    for (size_t k = 0; k < corr.target_index.size(); ++k)
        sum += (pose.apply(recon.vertices[k]) - gt.vertices[corr.target_index[k]]).norm() / d;
    return sum / static_cast<double>(corr.target_index.size());
}

double metric_dace(const Mesh& recon, const Mesh& gt_scan, const CorrespondenceSet& corr,
                   double d)
{
    if (!(d > 0.0))
        throw std::invalid_argument("metric_dace: interocular distance must be positive");
    if (corr.reliable_count() == 0)
        throw std::invalid_argument("metric_dace: empty reliable set");
    const CameraPose pose = align_by_reliable(recon, gt_scan, corr);
    const NearestNeighborGrid grid(gt_scan.vertices);
    double sum = 0.0;
    int count = 0;
    for (size_t k = 0; k < corr.reliable.size(); ++k)
    {
        if (!corr.reliable[k])
            continue;
        const Vec3 aligned = pose.apply(recon.vertices[k]);
        const int nn = grid.nearest(aligned);
        sum += (aligned - gt_scan.vertices[nn]).norm() / d;
        ++count;
    }
    return sum / static_cast<double>(count);
}

void save_weight_map(const VertexWeightMap& weights, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_weight_map: cannot open " + path);
    const uint32_t n = static_cast<uint32_t>(weights.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    for (const double w : weights)
    {
        const float f = static_cast<float>(w);
        out.write(reinterpret_cast<const char*>(&f), 4);
    }
}

VertexWeightMap load_weight_map(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_weight_map: cannot open " + path);
    uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    VertexWeightMap weights(n);
    for (uint32_t i = 0; i < n; ++i)
    {
        float f;
        in.read(reinterpret_cast<char*>(&f), 4);
        weights[i] = f;
    }
    if (!in)
        throw std::runtime_error("load_weight_map: truncated file " + path);
    return weights;
}

} // namespace facekit
