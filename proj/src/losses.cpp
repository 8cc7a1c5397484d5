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

#include "spanet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "spanet/error.hpp"
#include "spanet/subregion.hpp"

namespace spanet {

namespace {

void RequireBatch(std::size_t a, std::size_t b, const char* what) {
  if (a == 0) ThrowData(std::string(what) + ": empty batch");
  if (a != b) ThrowData(std::string(what) + ": batch size mismatch");
}

double MaskedExcess(const DensityMap& pred, const DensityMap& gt,
                    const DiscrepancyMask& mask) {
  RequireSameShape(pred, gt, "MEP loss");
  if (mask.height() != pred.height() || mask.width() != pred.width()) {
    ThrowData("MEP loss: mask shape does not match density map");
  }
  const auto p = pred.values();
  const auto g = gt.values();
  const auto s = mask.values();
  double pred_sum = 0.0;
  double gt_sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pred_sum += s[i] * p[i];
    gt_sum += s[i] * g[i];
  }
  return pred_sum - gt_sum;
}

}  // namespace

double L2Loss(std::span<const DensityMap> preds, std::span<const DensityMap> gts) {
  RequireBatch(preds.size(), gts.size(), "L2 loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    RequireSameShape(preds[i], gts[i], "L2 loss");
    const auto p = preds[i].values();
    const auto g = gts[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double d = p[k] - g[k];
      sum += d * d;
    }
  }
  return sum / (2.0 * static_cast<double>(preds.size()));
}

DensityMap L2Upstream(const DensityMap& pred, const DensityMap& gt,
                      std::size_t batch) {
  RequireSameShape(pred, gt, "L2 gradient");
  DensityMap up = pred - gt;
  up *= 1.0 / static_cast<double>(batch);
  return up;
}

double RankingHinge(double inner_count, double outer_count,
                    const RankingLossConfig& cfg) {
  return std::max(0.0, inner_count - outer_count + cfg.xi);
}

bool RankingHingeActive(double inner_count, double outer_count,
                        const RankingLossConfig& cfg) {
  return inner_count - outer_count + cfg.xi > 0.0;
}

double MepLoss(std::span<const DensityMap> preds, std::span<const DensityMap> gts,
               std::span<const DiscrepancyMask> masks) {
  RequireBatch(preds.size(), gts.size(), "MEP loss");
  if (masks.size() != preds.size()) ThrowData("MEP loss: mask count mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += std::fabs(MaskedExcess(preds[i], gts[i], masks[i]));
  }
  return sum / static_cast<double>(preds.size());
}

DensityMap MepUpstream(const DensityMap& pred, const DensityMap& gt,
                       const DiscrepancyMask& mask, std::size_t batch) {
  const double excess = MaskedExcess(pred, gt, mask);
  DensityMap up(pred.height(), pred.width());
  if (excess == 0.0) return up;
  const double scale = (excess > 0.0 ? 1.0 : -1.0) / static_cast<double>(batch);
  auto u = up.values();
  const auto s = mask.values();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = scale * s[i];
  return up;
}

LossReport GlobalLoss(std::vector<double> ranking, double mep, double l2,
                      const LossWeights& weights, double mesa_diag) {
  LossReport report;
  double ranking_sum = 0.0;
  for (double r : ranking) ranking_sum += r;
  report.ranking = std::move(ranking);
  report.mep = mep;
  report.l2 = l2;
  report.global = weights.ranking * ranking_sum + weights.mep * mep + weights.l2 * l2;
  report.mesa_diag = mesa_diag;
  return report;
}

std::string ToJson(const LossReport& report) {
  nlohmann::json j;
  j["l2"] = report.l2;
  j["ranking"] = report.ranking;
  j["mep"] = report.mep;
  j["global"] = report.global;
  j["mesa_diag"] = report.mesa_diag;
  return j.dump();
}

}  // namespace spanet
