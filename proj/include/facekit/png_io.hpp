/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/png_io.hpp
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
#include "facekit/rasterizer.hpp"

#include <string>

namespace facekit {

/// Writes RGB in [0,1] as 8-bit PNG (values clamped and rounded).
void write_png_rgb(const ImageRGB& image, const std::string& path);

/// Writes RGB plus an alpha plane in [0,1] as 8-bit RGBA PNG.
void write_png_rgba(const ImageRGB& image, const Image<double>& alpha, const std::string& path);

/// Writes scalars in [0,1] as 16-bit grayscale PNG.
void write_png_gray16(const Image<double>& image, const std::string& path);

/// Reads an 8- or 16-bit PNG as RGB in [0,1] (gray and palette images are expanded).
ImageRGB read_png_rgb(const std::string& path);

/// Reads a 16-bit grayscale PNG as scalars in [0,1].
Image<double> read_png_gray16(const std::string& path);

/**
 * Exports a render buffer: color as 8-bit PNG, depth affine-mapped to 16-bit
 * PNG with the min/max recorded in a JSON sidecar, and tri_index as a raw
 * little-endian u32 grid prefixed by u32 width and height.
 */
void export_render_buffer(const RenderBuffer& buffer, const std::string& prefix);

} // namespace facekit
