/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/image.hpp
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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <vector>

namespace facekit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/**
 * Dense row-major H x W raster. Row 0 is the top image row; pixel (x, y)
 * addresses column x of row y.
 */
template <typename T>
class Image
{
public:
    Image() = default;
    Image(int width, int height, const T& fill = T{})
        : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill)
    {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("Image: dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }

    T& at(int x, int y)
    {
        assert(contains(x, y));
        return data_[static_cast<size_t>(y) * width_ + x];
    }
    const T& at(int x, int y) const
    {
        assert(contains(x, y));
        return data_[static_cast<size_t>(y) * width_ + x];
    }

    bool contains(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using ImageRGB = Image<Vec3>;

/**
 * Bilinear sample at a continuous position; pixel centers sit on integer
 * coordinates and samples are clamped to the image border.
 */
template <typename T>
T sample_bilinear(const Image<T>& image, double x, double y)
{
    const double cx = std::clamp(x, 0.0, static_cast<double>(image.width() - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(image.height() - 1));
    const int x0 = static_cast<int>(std::floor(cx));
    const int y0 = static_cast<int>(std::floor(cy));
    const int x1 = std::min(x0 + 1, image.width() - 1);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double fx = cx - x0;
    const double fy = cy - y0;
    return image.at(x0, y0) * ((1 - fx) * (1 - fy)) + image.at(x1, y0) * (fx * (1 - fy)) +
           image.at(x0, y1) * ((1 - fx) * fy) + image.at(x1, y1) * (fx * fy);
}

} // namespace facekit
