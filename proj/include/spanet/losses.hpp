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
#include <string>
#include <vector>

#include "spanet/density_map.hpp"

namespace spanet {

class DiscrepancyMask;

struct RankingLossConfig {
  double xi = 0.0;  // margin in persons, >= 0
};

struct LossWeights {
  double ranking = 1.0;
  double mep = 1.0;
  double l2 = 1.0;
};

/// Per-step loss components. `global` is the weighted composite; with unit
/// weights it equals sum(ranking) + mep + l2.
struct LossReport {
  double l2 = 0.0;
  std::vector<double> ranking;
  double mep = 0.0;
  double global = 0.0;
  double mesa_diag = 0.0;
};

// (1 / 2N) sum_i sum_p (pred_i(p) - gt_i(p))^2
double L2Loss(std::span<const DensityMap> preds, std::span<const DensityMap> gts);
// d L2 / d pred_i = (pred_i - gt_i) / N
DensityMap L2Upstream(const DensityMap& pred, const DensityMap& gt, std::size_t batch);

// max(0, c1 - c2 + xi)
double RankingHinge(double inner_count, double outer_count,
                    const RankingLossConfig& cfg);
// True strictly outside the dead zone; the kink itself takes the zero branch.
bool RankingHingeActive(double inner_count, double outer_count,
                        const RankingLossConfig& cfg);

// (1/N) sum_i |sum_p S_i(p) pred_i(p) - sum_p S_i(p) gt_i(p)|
double MepLoss(std::span<const DensityMap> preds, std::span<const DensityMap> gts,
               std::span<const DiscrepancyMask> masks);
// d/d pred_i of the MEP term for one image: sign(excess) * S / N, with the
// subgradient 0 at excess == 0.
DensityMap MepUpstream(const DensityMap& pred, const DensityMap& gt,
                       const DiscrepancyMask& mask, std::size_t batch);

LossReport GlobalLoss(std::vector<double> ranking, double mep, double l2,
                      const LossWeights& weights = {}, double mesa_diag = 0.0);

std::string ToJson(const LossReport& report);

}  // namespace spanet
