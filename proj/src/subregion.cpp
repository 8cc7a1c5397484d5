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

#include "spanet/subregion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "spanet/error.hpp"

namespace spanet {

namespace {

std::atomic<std::uint64_t> g_subregion_calls{0};

constexpr double kRelativeScaleFloor = 1e-12;

double Sigmoid(double x) {
  // exp overflows past ~709; the asymptotes are exact there.
  if (x > 700.0) return 1.0;
  if (x < -700.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

void RequireMaskShape(const DensityMap& map, int height, int width,
                      const char* what) {
  if (map.height() != height || map.width() != width) {
    ThrowData(std::string(what) + ": mask shape does not match density map");
  }
}

}  // namespace

std::string AnchorName(Anchor anchor) {
  switch (anchor) {
    case Anchor::kBottomRight: return "bottom-right";
    case Anchor::kBottomLeft: return "bottom-left";
    case Anchor::kTopRight: return "top-right";
    case Anchor::kTopLeft: return "top-left";
    case Anchor::kCenter: return "center";
  }
  return "bottom-right";
}

Anchor ParseAnchor(const std::string& name) {
  if (name == "bottom-right") return Anchor::kBottomRight;
  if (name == "bottom-left") return Anchor::kBottomLeft;
  if (name == "top-right") return Anchor::kTopRight;
  if (name == "top-left") return Anchor::kTopLeft;
  if (name == "center") return Anchor::kCenter;
  ThrowUsage("unknown anchor '" + name + "'");
}

PatchMask::PatchMask(int height, int width, RectRegion rect)
    : height_(height), width_(width), rect_(rect) {
  if (rect.top < 0 || rect.left < 0 || rect.bottom >= height ||
      rect.right >= width || rect.top > rect.bottom || rect.left > rect.right) {
    ThrowData("patch rectangle outside the mask");
  }
}

std::vector<std::uint8_t> PatchMask::bits() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(height_) * width_, 0);
  for (int r = rect_.top; r <= rect_.bottom; ++r) {
    for (int c = rect_.left; c <= rect_.right; ++c) {
      out[static_cast<std::size_t>(r) * width_ + c] = 1;
    }
  }
  return out;
}

BranchSchedule BuildBranchSchedule(int height, int width, int branches,
                                   Anchor anchor) {
  if (height < 2 || width < 2 || branches < 1 ||
      branches > std::min(height, width) - 1) {
    ThrowUsage("branch count " + std::to_string(branches) +
               " out of range for a " + std::to_string(height) + "x" +
               std::to_string(width) + " map");
  }
  BranchSchedule schedule;
  schedule.height = height;
  schedule.width = width;
  schedule.branches = branches;
  schedule.anchor = anchor;
  const int steps = branches + 1;
  for (int k = 1; k <= steps; ++k) {
    const int h = (k * height + steps - 1) / steps;
    const int w = (k * width + steps - 1) / steps;
    RectRegion r;
    switch (anchor) {
      case Anchor::kBottomRight:
        r = {height - h, width - w, height - 1, width - 1};
        break;
      case Anchor::kBottomLeft:
        r = {height - h, 0, height - 1, w - 1};
        break;
      case Anchor::kTopRight:
        r = {0, width - w, h - 1, width - 1};
        break;
      case Anchor::kTopLeft:
        r = {0, 0, h - 1, w - 1};
        break;
      case Anchor::kCenter: {
        const int top = (height - h) / 2;
        const int left = (width - w) / 2;
        r = {top, left, top + h - 1, left + w - 1};
        break;
      }
    }
    schedule.patches.push_back(r);
  }
  return schedule;
}

DiscrepancyMask::DiscrepancyMask(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) ThrowData("mask dimensions must be positive");
  if (!(fill >= 0.0 && fill <= 1.0)) ThrowData("mask values must lie in [0, 1]");
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

DiscrepancyMask::DiscrepancyMask(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1) ThrowData("mask dimensions must be positive");
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    ThrowData("mask value count does not match its dimensions");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) ThrowData("mask values must lie in [0, 1]");
  }
}

double DiscrepancyMask::HardFraction() const {
  std::size_t hard = 0;
  for (double v : values_) hard += v >= 0.5 ? 1 : 0;
  return static_cast<double>(hard) / static_cast<double>(values_.size());
}

double MaskPoolCount(const DensityMap& map, const PatchMask& mask) {
  RequireMaskShape(map, mask.height(), mask.width(), "mask pooling");
  const RectRegion& r = mask.rect();
  double sum = 0.0;
  for (int row = r.top; row <= r.bottom; ++row) {
    for (int col = r.left; col <= r.right; ++col) sum += map(row, col);
  }
  return sum;
}

DiscrepancyMask SigmoidThreshold(const DensityMap& diff, double sigma, double delta) {
  if (!(delta > 0.0)) ThrowUsage("sigmoid sharpness delta must be positive");
  std::vector<double> values(diff.size());
  const auto d = diff.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = Sigmoid(delta * (d[i] - sigma));
  }
  return DiscrepancyMask(diff.height(), diff.width(), std::move(values));
}

DensityMap Erase(const DensityMap& map, const DiscrepancyMask& mask) {
  RequireMaskShape(map, mask.height(), mask.width(), "erase");
  DensityMap out = map;
  auto o = out.values();
  const auto s = mask.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= 1.0 - s[i];
  return out;
}

DiscrepancyMask FuseMasks(std::span<const DiscrepancyMask> masks) {
  if (masks.empty()) ThrowData("cannot fuse an empty mask list");
  std::vector<double> values(masks.front().values().begin(),
                             masks.front().values().end());
  for (const DiscrepancyMask& m : masks.subspan(1)) {
    if (m.height() != masks.front().height() || m.width() != masks.front().width()) {
      ThrowData("cannot fuse masks of different shapes");
    }
    const auto v = m.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::max(values[i], v[i]);
  }
  return DiscrepancyMask(masks.front().height(), masks.front().width(), std::move(values));
}

double Percentile(std::span<const double> values, double q) {
  if (values.empty()) ThrowData("percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) ThrowUsage("percentile must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  const auto index = static_cast<std::size_t>(std::floor(q * (sorted.size() - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + index, sorted.end());
  return sorted[index];
}

SubregionResult GenerateSubregion(ConvDensityModel& caller_model,
                                  Optimizer& caller_optimizer,
                                  const Image& image,
                                  const BranchSchedule& schedule,
                                  const RankConfig& rank,
                                  const ThresholdConfig& threshold,
                                  const DensityMap* gt) {
  ++g_subregion_calls;
  if (rank.xi_mode == XiMode::kGroundTruth && gt == nullptr) {
    ThrowUsage("ground-truth margin mode needs the ground-truth map");
  }

  std::optional<ConvDensityModel> scratch_model;
  std::optional<Optimizer> scratch_optimizer;
  if (rank.dry_rank) {
    scratch_model.emplace(caller_model);
    scratch_optimizer.emplace(caller_optimizer);
  }
  ConvDensityModel& model = rank.dry_rank ? *scratch_model : caller_model;
  Optimizer& optimizer = rank.dry_rank ? *scratch_optimizer : caller_optimizer;

  ForwardPass pass = model.ForwardCached(image);
  const int height = pass.output().height();
  const int width = pass.output().width();
  if (height != schedule.height || width != schedule.width) {
    ThrowData("branch schedule is " + std::to_string(schedule.height) + "x" +
              std::to_string(schedule.width) + " but the model outputs " +
              std::to_string(height) + "x" + std::to_string(width));
  }
  if (gt != nullptr) RequireSameShape(*gt, pass.output(), "subregion ground truth");

  SubregionResult result{DiscrepancyMask(height, width), {}, {}, std::nullopt};
  DiscrepancyMask previous_mask(height, width, 0.0);
  std::optional<DensityMap> previous_map;

  for (int k = 0; k < schedule.branches; ++k) {
    const PatchMask inner = schedule.inner(k);
    const PatchMask outer = schedule.outer(k);
    const DensityMap raw = pass.output();
    const DensityMap current = Erase(raw, previous_mask);

    BranchTrace trace;
    trace.inner_count = MaskPoolCount(current, inner);
    const DensityMap& outer_source =
        rank.same_map_pooling || !previous_map ? current : *previous_map;
    trace.outer_count = MaskPoolCount(outer_source, outer);
    trace.xi = rank.xi_mode == XiMode::kConstant
                   ? rank.xi
                   : MaskPoolCount(*gt, outer) - MaskPoolCount(*gt, inner);
    const RankingLossConfig hinge{trace.xi};
    trace.ranking_loss = RankingHinge(trace.inner_count, trace.outer_count, hinge);
    trace.active = RankingHingeActive(trace.inner_count, trace.outer_count, hinge);

    DensityMap renewed = raw;
    if (trace.active) {
      // d/dtheta [C(M1) - C(M2)] through the erased map.
      DensityMap upstream(height, width);
      const RectRegion& ri = inner.rect();
      const RectRegion& ro = outer.rect();
      for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
          double m = (ri.Contains(r, c) ? 1.0 : 0.0);
          if (rank.same_map_pooling || !previous_map) m -= ro.Contains(r, c) ? 1.0 : 0.0;
          upstream(r, c) = rank.weight * m * (1.0 - previous_mask(r, c));
        }
      }
      optimizer.Apply(model, model.Backward(pass, upstream), rank.lr);
      pass = model.ForwardCached(image);
      renewed = pass.output();
    }

    DensityMap change(height, width);
    {
      auto ch = change.values();
      const auto a = renewed.values();
      const auto b = raw.values();
      const auto e = previous_mask.values();
      for (std::size_t i = 0; i < ch.size(); ++i) {
        ch[i] = std::fabs(a[i] - b[i]) * (1.0 - e[i]);
        trace.max_change = std::max(trace.max_change, ch[i]);
      }
    }

    switch (threshold.mode) {
      case ThresholdMode::kRelative: {
        const double scale =
            std::max(Percentile(change.values(), threshold.percentile), kRelativeScaleFloor);
        trace.sigma = scale;
        trace.delta = threshold.delta / scale;
        break;
      }
      case ThresholdMode::kPercentile:
        trace.sigma = Percentile(change.values(), threshold.percentile);
        trace.delta = threshold.delta;
        break;
      case ThresholdMode::kFixed:
        trace.sigma = threshold.sigma;
        trace.delta = threshold.delta;
        break;
    }
    DiscrepancyMask mask = SigmoidThreshold(change, trace.sigma, trace.delta);

    previous_map = current;
    previous_mask = mask;
    result.per_branch.push_back(std::move(mask));
    result.trace.push_back(trace);
  }

  result.fused = FuseMasks(result.per_branch);
  result.final_prediction = pass.output();
  return result;
}

std::uint64_t SubregionInvocationCount() { return g_subregion_calls.load(); }

}  // namespace spanet
