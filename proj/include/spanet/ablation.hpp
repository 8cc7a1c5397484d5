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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spanet/synth.hpp"
#include "spanet/trainer.hpp"

namespace spanet {

enum class AblationAxis { kLossMode, kAnchor, kPooling, kBranches, kStride, kWeights };

std::string AblationAxisName(AblationAxis axis);  // loss_mode, anchor, pooling, K, stride, weights
AblationAxis ParseAblationAxis(const std::string& name);

struct AblationSpec {
  AblationAxis axis = AblationAxis::kLossMode;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  SuiteSpec suite;
  TrainConfig base;
  // Branch counts for the K axis; empty selects {1, H/16, H/8, H/4, H/2}.
  std::vector<int> branch_values;
  std::vector<int> stride_values{1, 2, 4};
  int random_weight_draws = 3;
  // Parallel training runs; each run is single threaded.
  int workers = 1;
  // Called once per finished run, possibly from a worker thread.
  std::function<void(const std::string& label, std::uint64_t seed, const TrainReport&)>
      on_run;
};

struct AblationVariant {
  std::string label;
  TrainConfig config;
};

struct AblationRow {
  std::string label;
  TrainConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<double> val_mae;
  std::vector<double> val_mse;
  std::vector<double> seconds;
  double median_mae = 0.0;
  double median_mse = 0.0;
};

struct AblationTable {
  std::string axis;
  std::vector<AblationRow> rows;
};

double Median(std::span<const double> values);

// The variants an axis expands to, in table order. The map height decides
// the default branch counts.
std::vector<AblationVariant> AblationVariants(const AblationSpec& spec);

AblationTable RunAblation(const AblationSpec& spec);

std::string ToJson(const AblationTable& table);
std::string ToCsv(const AblationTable& table);

/// Signed count error (prediction minus ground truth) on the left and right
/// halves of the density map, averaged over a split.
struct HalfBias {
  double left = 0.0;
  double right = 0.0;
};
HalfBias EvaluateHalfBias(const ConvDensityModel& model, std::span<const Sample> split);

}  // namespace spanet
