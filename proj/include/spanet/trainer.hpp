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
#include <span>
#include <string>
#include <vector>

#include "spanet/losses.hpp"
#include "spanet/model.hpp"
#include "spanet/subregion.hpp"
#include "spanet/synth.hpp"

namespace spanet {

// Loss combinations of the ablation table.
enum class LossMode { kL2, kRankMep, kL2Rank, kL2RankMep };

std::string LossModeName(LossMode mode);  // "L2", "Lr+Lmep", "L2+Lr", "L2+Lr+Lmep"
LossMode ParseLossMode(const std::string& name);
bool UsesRanking(LossMode mode);
bool UsesMep(LossMode mode);
bool UsesL2(LossMode mode);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 1;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  // <= 0 selects H/8 of the density map (at least 1).
  int branches = 0;
  Anchor anchor = Anchor::kBottomRight;
  bool same_map_pooling = true;
  bool dry_rank = false;
  LossMode loss_mode = LossMode::kL2RankMep;
  LossWeights weights;
  XiMode xi_mode = XiMode::kConstant;
  double xi = 0.0;
  ThresholdConfig threshold;
  double init_std = 0.01;
  int output_stride = 1;
  double ema_alpha = 0.1;
  // Compute the exact MESA diagnostic for every step report.
  bool mesa_diagnostic = false;
};

// Resolves TrainConfig::branches for a density map of the given height.
int ResolveBranches(const TrainConfig& cfg, int map_height, int map_width);

struct EpochRecord {
  int epoch = 0;
  double train_mae = 0.0;
  double train_mse = 0.0;
  double val_mae = 0.0;
  double val_mse = 0.0;
  double l2 = 0.0;
  double ranking = 0.0;
  double mep = 0.0;
  double global = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<double> ema_train_mae;
  std::vector<double> ema_val_mae;
  std::vector<LossReport> steps;
  std::uint64_t subregion_calls = 0;
  double seconds = 0.0;

  double final_val_mae() const { return epochs.empty() ? 0.0 : epochs.back().val_mae; }
};

// e_0 = x_0, e_t = alpha x_t + (1 - alpha) e_{t-1}
std::vector<double> ExponentialMovingAverage(std::span<const double> values, double alpha);

// Side outputs of a training step.
struct StepTelemetry {
  std::uint64_t subregion_calls = 0;
  // Estimated counts from the forward pass that opens the step.
  std::vector<double> counts;
  // Fused masks per image (empty when the ranking stage is skipped).
  std::vector<DiscrepancyMask> masks;
  std::vector<std::vector<BranchTrace>> branch_traces;
};

/// One optimisation step over a batch, in order: forward; K ranking updates
/// inside GenerateSubregion (per image); one step on the MEP loss over the
/// fused masks; one step on the plain L2 loss without mask pooling. Stages
/// not selected by cfg.loss_mode are skipped and report zero.
LossReport TrainStep(ConvDensityModel& model, Optimizer& optimizer,
                     std::span<const Sample* const> batch, const TrainConfig& cfg,
                     StepTelemetry* telemetry = nullptr);

LossReport TrainStep(ConvDensityModel& model, Optimizer& optimizer,
                     const Sample& sample, const TrainConfig& cfg,
                     StepTelemetry* telemetry = nullptr);

// Count errors of the model over a split.
struct SplitEval {
  double mae = 0.0;
  double mse = 0.0;
  std::vector<double> estimated;
};
SplitEval EvaluateSplit(const ConvDensityModel& model, std::span<const Sample> split);

/// Epoch loop with seeded shuffling. The model is initialised by the caller.
TrainReport Train(ConvDensityModel& model, const Dataset& dataset,
                  const TrainConfig& cfg);

// Builds the default desk model for cfg, initialised from cfg.seed.
ConvDensityModel MakeInitialModel(const TrainConfig& cfg);

std::string ToJson(const TrainConfig& cfg);
TrainConfig TrainConfigFromJson(const std::string& json);
std::string ToJson(const TrainReport& report, bool include_steps = true);
// One row per epoch with raw and EMA-smoothed MAE.
std::string CurvesCsv(const TrainReport& report);

}  // namespace spanet
