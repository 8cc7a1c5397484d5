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

#include <span>

#include "spanet/density_map.hpp"

namespace spanet {

struct CountErrors {
  double mae = 0.0;
  double mse = 0.0;  // root of the mean squared error, as crowd-counting reports it
};

struct MetricReport {
  double mae = 0.0;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

inline constexpr double kPsnrCapDb = 100.0;

CountErrors MaeMse(std::span<const double> estimated, std::span<const double> truth);

// 10 log10(peak^2 / mse) with peak = max over both maps (floored at 1e-12);
// identical maps give the cap.
double Psnr(const DensityMap& a, const DensityMap& b);

// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5) with
// C1 = (0.01 L)^2, C2 = (0.03 L)^2 and L = max - min over both maps,
// floored at 1e-12. Maps smaller than the window are rejected.
double Ssim(const DensityMap& a, const DensityMap& b);

}  // namespace spanet
