/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/delaunay.hpp
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
#include <vector>

namespace facekit {

/**
 * Bowyer-Watson Delaunay triangulation of a 2D point set. Insertion order is
 * the input order, so results are deterministic; cocircular configurations
 * resolve to one fixed diagonal. Returned triangles are counter-clockwise in
 * (x right, y down) image coordinates.
 */
std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points);

} // namespace facekit
