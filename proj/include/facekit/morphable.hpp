/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/morphable.hpp
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

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace facekit {

/**
 * Linear statistical model of face shape and texture: a mean plus identity,
 * expression and texture principal axes, all sharing one vertex layout.
 * Shape vectors are stacked (x0,y0,z0, x1,y1,z1, ...).
 */
struct MorphableModel
{
    Eigen::VectorXd mean_shape;   // 3N
    Eigen::MatrixXd id_basis;     // 3N x K_id
    Eigen::MatrixXd exp_basis;    // 3N x K_exp
    Eigen::VectorXd mean_texture; // 3N, RGB per vertex in [0,1]
    Eigen::MatrixXd tex_basis;    // 3N x K_tex
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec2> uv;

    int vertex_count() const { return static_cast<int>(mean_shape.size() / 3); }

    void save(const std::string& path) const;
    static MorphableModel load(const std::string& path);
};

struct ShapeParams
{
    Eigen::VectorXd alpha_id;
    Eigen::VectorXd alpha_exp;
};

/**
 * Weak-perspective rigid transform to the image plane: scale f (pixels per
 * model unit), rotation R, translation t3d. The projected x,y are image
 * coordinates; z is retained as depth (larger = nearer).
 */
struct CameraPose
{
    double f = 1.0;
    Mat3 R = Mat3::Identity();
    Vec3 t3d = Vec3::Zero();

    Vec3 apply(const Vec3& v) const { return f * (R * v) + t3d; }
    /// Throws unless R is a proper rotation (to 1e-9) and f > 0.
    void validate() const;
};

/// Evaluates mean + id_basis * alpha_id + exp_basis * alpha_exp onto the template topology.
Mesh evaluate_shape(const MorphableModel& model, const ShapeParams& params);

/// Evaluates mean_texture + tex_basis * beta as per-vertex RGB (not clamped).
std::vector<Vec3> evaluate_texture(const MorphableModel& model, const Eigen::VectorXd& beta);

/// Applies v -> f * R * v + t3d to every vertex.
Mesh rigid_project(const Mesh& mesh, const CameraPose& pose);

/**
 * Closed-form weighted similarity-transform alignment: the (f, R, t3d)
 * minimizing sum w_k || f*R*s_k + t3d - t_k ||^2, via the SVD of the
 * cross-covariance with reflection correction so det R = +1.
 * Throws on fewer than 3 pairs or a rank-deficient (collinear) configuration.
 */
CameraPose fit_rigid(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                     const std::vector<double>& weights = {});

/**
 * Splits a registered mesh into a canonical-frame shape and a pose: the pose
 * is fit from the template estimate to the registered vertices, and the
 * ground-truth shape is the registered mesh mapped back through the inverse
 * rigid transform, so rigid_project(shape, pose) reproduces the input.
 */
std::pair<Mesh, CameraPose> disentangle_rigid(const Mesh& registered,
                                              const Mesh& template_estimate);

/// Per-vertex displacement gt - (mean + id*alpha_id + exp*alpha_exp); the supervision target.
std::vector<Vec3> shape_residual(const Mesh& gt, const MorphableModel& model,
                                 const ShapeParams& params);

/**
 * Deterministic synthetic stand-in for a licensed face model: an ellipsoid
 * head patch on a latitude/longitude grid with smooth random orthonormal
 * shape and texture axes. Region labels, landmark rings and the left/right
 * mirror permutation are derived from the grid so tests can exercise
 * semantic machinery without proprietary data.
 */
struct SyntheticModelOptions
{
    uint64_t seed = 0;
    int vertex_target = 900;
    int id_dims = 20;
    int exp_dims = 8;
    int tex_dims = 8;
};

struct SyntheticModel
{
    MorphableModel model;
    int rows = 0;
    int cols = 0;
    enum Region
    {
        kCheek = 0,
        kEyes = 1,
        kNose = 2,
        kMouth = 3
    };
    std::vector<int> regions;        // one Region per vertex
    std::vector<int> mirror_map;     // vertex index of the left/right mirror partner
    std::vector<int> eye_landmarks;  // vertex ids enclosing both eyes
    std::vector<int> mouth_landmarks;
    std::vector<int> contour_band;   // cheek/jaw band eligible for silhouette marching
    std::vector<double> theta_deg;   // grid latitude per vertex
    std::vector<double> phi_deg;     // grid longitude per vertex (0 = straight ahead)
    int left_eye_center = -1;
    int right_eye_center = -1;

    double interocular_distance() const;
};

SyntheticModel synthesize_model(const SyntheticModelOptions& options);

class Rng;

/**
 * Smooth random 3-vector field over a rows x cols grid (stacked x,y,z per
 * node): a seeded combination of low-frequency separable modes. The
 * building block of the synthetic bases and of test deformations.
 */
Eigen::VectorXd smooth_grid_field(Rng& rng, int rows, int cols, double amplitude);

/// Rotation by pitch (about x), then yaw (about y): R = Rx(pitch) * Ry(yaw). Angles in degrees.
Mat3 rotation_pitch_yaw(double pitch_deg, double yaw_deg);

} // namespace facekit
