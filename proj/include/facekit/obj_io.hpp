/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/obj_io.hpp
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

#include <string>

namespace facekit {

/**
 * Reads ASCII OBJ. Supported records: v (with optional RGB color extension),
 * vt, and f in the v, v/vt or v/vt/vn forms. Faces must be triangles; vt
 * indices, when present, must agree with the position indices.
 */
Mesh read_obj(const std::string& path);

/// Writes v records (plus RGB when the mesh has colors), then vt, then f v/vt.
void write_obj(const Mesh& mesh, const std::string& path);

} // namespace facekit
