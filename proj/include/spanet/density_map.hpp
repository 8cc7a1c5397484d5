// Copyright 2026 The spanet-desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace spanet {

/// Row-major 2D grid of real densities (persons per pixel).
///
/// Predicted maps are not sign-constrained; only finiteness is enforced on
/// construction from raw values.
class DensityMap {
 public:
  DensityMap(int height, int width, double fill = 0.0);
  DensityMap(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int row, int col) {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }
  double operator()(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool SameShape(const DensityMap& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  DensityMap& operator+=(const DensityMap& other);
  DensityMap& operator-=(const DensityMap& other);
  DensityMap& operator*=(double scale);

  friend bool operator==(const DensityMap&, const DensityMap&) = default;

 private:
  int height_;
  int width_;
  std::vector<double> values_;
};

DensityMap operator+(DensityMap lhs, const DensityMap& rhs);
DensityMap operator-(DensityMap lhs, const DensityMap& rhs);

// Throws a data error naming `what` when the shapes differ.
void RequireSameShape(const DensityMap& a, const DensityMap& b,
                      std::string_view what);

struct Point {
  double row;
  double col;
};

/// Head-center annotations of one image, in full-resolution pixel units.
class PointAnnotationSet {
 public:
  PointAnnotationSet(int image_height, int image_width,
                     std::vector<Point> points = {});

  // Throws a data error when the point is outside the image.
  void Add(Point p);

  int image_height() const { return image_height_; }
  int image_width() const { return image_width_; }
  std::size_t count() const { return points_.size(); }
  std::span<const Point> points() const { return points_; }

 private:
  int image_height_;
  int image_width_;
  std::vector<Point> points_;
};

/// Sum of per-head isotropic Gaussians, each truncated at 4*sigma and
/// renormalized to unit mass over the pixels it covers inside the map.
/// The output has ceil(H/stride) x ceil(W/stride) pixels and points are
/// divided by the stride before rendering.
DensityMap RenderGroundTruth(const PointAnnotationSet& annotations,
                             double sigma, int output_stride = 1);

double TotalCount(const DensityMap& map);

/// Corner-aligned bilinear resampling.
DensityMap ResizeBilinear(const DensityMap& map, int new_height,
                          int new_width);

}  // namespace spanet
