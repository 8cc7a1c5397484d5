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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spanet/density_map.hpp"
#include "spanet/losses.hpp"
#include "spanet/mesa.hpp"
#include "spanet/model.hpp"

namespace spanet {

enum class Anchor { kBottomRight, kBottomLeft, kTopRight, kTopLeft, kCenter };

std::string AnchorName(Anchor anchor);
// Accepts "bottom-right", "bottom-left", "top-right", "top-left", "center".
Anchor ParseAnchor(const std::string& name);

/// Binary mask whose set pixels form one solid rectangle.
class PatchMask {
 public:
  PatchMask(int height, int width, RectRegion rect);

  int height() const { return height_; }
  int width() const { return width_; }
  const RectRegion& rect() const { return rect_; }
  bool at(int row, int col) const { return rect_.Contains(row, col); }
  std::vector<std::uint8_t> bits() const;

 private:
  int height_;
  int width_;
  RectRegion rect_;
};

/// K branches over K+1 nested patches sharing one anchor; branch k pools the
/// pair (patch k, patch k+1) and the last patch is the full map.
struct BranchSchedule {
  int height = 0;
  int width = 0;
  int branches = 0;
  Anchor anchor = Anchor::kBottomRight;
  std::vector<RectRegion> patches;

  PatchMask inner(int branch) const { return {height, width, patches[branch]}; }
  PatchMask outer(int branch) const { return {height, width, patches[branch + 1]}; }
};

// Linear growth from ceil(H/(K+1)) x ceil(W/(K+1)) to H x W.
// Requires 1 <= K <= min(H, W) - 1.
BranchSchedule BuildBranchSchedule(int height, int width, int branches,
                                   Anchor anchor);

/// Soft per-pixel mask with values in [0, 1].
class DiscrepancyMask {
 public:
  DiscrepancyMask(int height, int width, double fill = 0.0);
  DiscrepancyMask(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  double operator()(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::span<const double> values() const { return values_; }
  double HardFraction() const;  // share of pixels >= 0.5

  friend bool operator==(const DiscrepancyMask&, const DiscrepancyMask&) = default;

 private:
  int height_;
  int width_;
  std::vector<double> values_;
};

double MaskPoolCount(const DensityMap& map, const PatchMask& mask);

// S = 1 / (1 + exp(-delta (diff - sigma))) per pixel.
DiscrepancyMask SigmoidThreshold(const DensityMap& diff, double sigma, double delta);

// map * (1 - mask)
DensityMap Erase(const DensityMap& map, const DiscrepancyMask& mask);

// Pixelwise maximum.
DiscrepancyMask FuseMasks(std::span<const DiscrepancyMask> masks);

// Lower nearest-rank percentile: sorted[floor(q (n - 1))].
double Percentile(std::span<const double> values, double q);

enum class XiMode {
  kConstant,     // xi taken from the config
  kGroundTruth,  // xi = C_gt(outer) - C_gt(inner), per branch
};

struct RankConfig {
  XiMode xi_mode = XiMode::kConstant;
  double xi = 0.0;
  double lr = 1e-3;
  double weight = 1.0;
  bool same_map_pooling = true;
  // Updates are applied to a scratch copy so the caller's model is untouched.
  bool dry_rank = false;
};

enum class ThresholdMode {
  // sigma = percentile of the change map, delta measured in units of sigma.
  kRelative,
  // sigma = percentile of the change map, delta absolute.
  kPercentile,
  // sigma and delta both taken from the config.
  kFixed,
};

struct ThresholdConfig {
  ThresholdMode mode = ThresholdMode::kRelative;
  double percentile = 0.9;
  double delta = 100.0;
  double sigma = 0.1;  // kFixed only
};

struct BranchTrace {
  double inner_count = 0.0;
  double outer_count = 0.0;
  double xi = 0.0;
  double ranking_loss = 0.0;
  bool active = false;
  double sigma = 0.0;
  double delta = 0.0;
  double max_change = 0.0;
};

struct SubregionResult {
  DiscrepancyMask fused;
  std::vector<DiscrepancyMask> per_branch;
  std::vector<BranchTrace> trace;
  // Density map of the model after the last branch update.
  std::optional<DensityMap> final_prediction;
};

/// Multi-branch discrepancy discovery. For each branch: pool the pair of
/// patches on the (erased) current map, take one optimizer step on the
/// ranking hinge when it is active, rerun the model, threshold the change
/// through a sigmoid and erase the result from the next branch's map.
/// Returns the pixelwise maximum over all branch masks.
///
/// Mutates `model` and `optimizer` unless rank.dry_rank is set. `gt` is
/// required for XiMode::kGroundTruth.
SubregionResult GenerateSubregion(ConvDensityModel& model, Optimizer& optimizer,
                                  const Image& image,
                                  const BranchSchedule& schedule,
                                  const RankConfig& rank,
                                  const ThresholdConfig& threshold,
                                  const DensityMap* gt = nullptr);

// Number of GenerateSubregion calls in this process.
std::uint64_t SubregionInvocationCount();

}  // namespace spanet
