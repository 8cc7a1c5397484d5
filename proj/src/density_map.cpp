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

#include "spanet/density_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spanet/error.hpp"

namespace spanet {

namespace {

void RequireValidDims(int height, int width) {
  if (height < 1 || width < 1) {
    ThrowData("density map dimensions must be positive, got " +
              std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

DensityMap::DensityMap(int height, int width, double fill)
    : height_(height), width_(width) {
  RequireValidDims(height, width);
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

DensityMap::DensityMap(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  RequireValidDims(height, width);
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    ThrowData("density map expects " + std::to_string(height * width) +
              " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) ThrowData("density map values must be finite");
  }
}

DensityMap& DensityMap::operator+=(const DensityMap& other) {
  RequireSameShape(*this, other, "density map addition");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

DensityMap& DensityMap::operator-=(const DensityMap& other) {
  RequireSameShape(*this, other, "density map subtraction");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

DensityMap& DensityMap::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

DensityMap operator+(DensityMap lhs, const DensityMap& rhs) {
  lhs += rhs;
  return lhs;
}

DensityMap operator-(DensityMap lhs, const DensityMap& rhs) {
  lhs -= rhs;
  return lhs;
}

void RequireSameShape(const DensityMap& a, const DensityMap& b,
                      std::string_view what) {
  if (!a.SameShape(b)) {
    ThrowData(std::string(what) + ": dimension mismatch " +
              std::to_string(a.height()) + "x" + std::to_string(a.width()) +
              " vs " + std::to_string(b.height()) + "x" +
              std::to_string(b.width()));
  }
}

PointAnnotationSet::PointAnnotationSet(int image_height, int image_width,
                                       std::vector<Point> points)
    : image_height_(image_height), image_width_(image_width) {
  if (image_height < 1 || image_width < 1) {
    ThrowData("annotation image dimensions must be positive");
  }
  points_.reserve(points.size());
  for (const Point& p : points) Add(p);
}

void PointAnnotationSet::Add(Point p) {
  if (!(p.row >= 0.0 && p.row < image_height_ && p.col >= 0.0 &&
        p.col < image_width_)) {
    ThrowData("annotation (" + std::to_string(p.row) + ", " +
              std::to_string(p.col) + ") outside image bounds " +
              std::to_string(image_height_) + "x" +
              std::to_string(image_width_));
  }
  points_.push_back(p);
}

DensityMap RenderGroundTruth(const PointAnnotationSet& annotations,
                             double sigma, int output_stride) {
  if (!(sigma > 0.0)) ThrowUsage("ground-truth sigma must be positive");
  if (output_stride < 1) ThrowUsage("output stride must be >= 1");

  const int height =
      (annotations.image_height() + output_stride - 1) / output_stride;
  const int width =
      (annotations.image_width() + output_stride - 1) / output_stride;
  DensityMap map(height, width);

  const double radius = 4.0 * sigma;
  const double radius_sq = radius * radius;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> kernel;

  for (const Point& p : annotations.points()) {
    const double row = p.row / output_stride;
    const double col = p.col / output_stride;
    const int r0 = std::max(0, static_cast<int>(std::ceil(row - radius)));
    const int r1 = std::min(height - 1, static_cast<int>(std::floor(row + radius)));
    const int c0 = std::max(0, static_cast<int>(std::ceil(col - radius)));
    const int c1 = std::min(width - 1, static_cast<int>(std::floor(col + radius)));

    kernel.assign(static_cast<std::size_t>(std::max(0, r1 - r0 + 1)) *
                      std::max(0, c1 - c0 + 1),
                  0.0);
    double mass = 0.0;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double dr = r - row;
        const double dc = c - col;
        const double d2 = dr * dr + dc * dc;
        if (d2 > radius_sq) continue;
        const double v = std::exp(-d2 * inv_two_var);
        kernel[static_cast<std::size_t>(r - r0) * (c1 - c0 + 1) + (c - c0)] = v;
        mass += v;
      }
    }

    if (mass <= 0.0) {
      // Kernel narrower than the pixel grid: all mass goes to the nearest pixel.
      const int r = std::clamp(static_cast<int>(std::lround(row)), 0, height - 1);
      const int c = std::clamp(static_cast<int>(std::lround(col)), 0, width - 1);
      map(r, c) += 1.0;
      continue;
    }
    const double inv_mass = 1.0 / mass;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        map(r, c) +=
            kernel[static_cast<std::size_t>(r - r0) * (c1 - c0 + 1) + (c - c0)] *
            inv_mass;
      }
    }
  }
  return map;
}

double TotalCount(const DensityMap& map) {
  double sum = 0.0;
  for (double v : map.values()) sum += v;
  return sum;
}

DensityMap ResizeBilinear(const DensityMap& map, int new_height,
                          int new_width) {
  if (new_height < 1 || new_width < 1) {
    ThrowUsage("resize target must be at least 1x1");
  }
  DensityMap out(new_height, new_width);
  const int h = map.height();
  const int w = map.width();
  const double row_scale =
      new_height > 1 ? static_cast<double>(h - 1) / (new_height - 1) : 0.0;
  const double col_scale =
      new_width > 1 ? static_cast<double>(w - 1) / (new_width - 1) : 0.0;

  for (int r = 0; r < new_height; ++r) {
    const double src_r = r * row_scale;
    const int r0 = std::min(static_cast<int>(std::floor(src_r)), h - 1);
    const int r1 = std::min(r0 + 1, h - 1);
    const double fr = src_r - r0;
    for (int c = 0; c < new_width; ++c) {
      const double src_c = c * col_scale;
      const int c0 = std::min(static_cast<int>(std::floor(src_c)), w - 1);
      const int c1 = std::min(c0 + 1, w - 1);
      const double fc = src_c - c0;
      if (fr == 0.0 && fc == 0.0) {
        out(r, c) = map(r0, c0);
        continue;
      }
      const double top = map(r0, c0) * (1.0 - fc) + map(r0, c1) * fc;
      const double bottom = map(r1, c0) * (1.0 - fc) + map(r1, c1) * fc;
      out(r, c) = top * (1.0 - fr) + bottom * fr;
    }
  }
  return out;
}

}  // namespace spanet
