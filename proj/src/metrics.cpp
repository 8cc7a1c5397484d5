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

#include "spanet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "spanet/error.hpp"

namespace spanet {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kRangeFloor = 1e-12;

std::array<double, kWindow * kWindow> GaussianWindow() {
  std::array<double, kWindow * kWindow> w{};
  const int half = kWindow / 2;
  double sum = 0.0;
  for (int y = 0; y < kWindow; ++y) {
    for (int x = 0; x < kWindow; ++x) {
      const double dy = y - half;
      const double dx = x - half;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kWindowSigma * kWindowSigma));
      w[y * kWindow + x] = v;
      sum += v;
    }
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

CountErrors MaeMse(std::span<const double> estimated, std::span<const double> truth) {
  if (estimated.empty()) ThrowData("MAE/MSE over an empty list");
  if (estimated.size() != truth.size()) ThrowData("MAE/MSE list length mismatch");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const double d = estimated[i] - truth[i];
    abs_sum += std::fabs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(estimated.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

double Psnr(const DensityMap& a, const DensityMap& b) {
  RequireSameShape(a, b, "PSNR");
  const auto x = a.values();
  const auto y = b.values();
  double peak = kRangeFloor;
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    peak = std::max({peak, x[i], y[i]});
    const double d = x[i] - y[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double Ssim(const DensityMap& a, const DensityMap& b) {
  RequireSameShape(a, b, "SSIM");
  if (a.height() < kWindow || a.width() < kWindow) {
    ThrowData("SSIM needs maps of at least 11x11 pixels");
  }
  const auto x = a.values();
  const auto y = b.values();
  double lo = x[0];
  double hi = x[0];
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo = std::min({lo, x[i], y[i]});
    hi = std::max({hi, x[i], y[i]});
  }
  const double range = std::max(hi - lo, kRangeFloor);
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const auto window = GaussianWindow();

  double total = 0.0;
  long windows = 0;
  for (int top = 0; top + kWindow <= a.height(); ++top) {
    for (int left = 0; left + kWindow <= a.width(); ++left) {
      double mx = 0.0, my = 0.0;
      for (int dy = 0; dy < kWindow; ++dy) {
        for (int dx = 0; dx < kWindow; ++dx) {
          const double w = window[dy * kWindow + dx];
          mx += w * a(top + dy, left + dx);
          my += w * b(top + dy, left + dx);
        }
      }
      double vx = 0.0, vy = 0.0, cxy = 0.0;
      for (int dy = 0; dy < kWindow; ++dy) {
        for (int dx = 0; dx < kWindow; ++dx) {
          const double w = window[dy * kWindow + dx];
          const double ex = a(top + dy, left + dx) - mx;
          const double ey = b(top + dy, left + dx) - my;
          vx += w * ex * ex;
          vy += w * ey * ey;
          cxy += w * (ex * ey);
        }
      }
      total += ((2.0 * (mx * my) + c1) * (2.0 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace spanet
