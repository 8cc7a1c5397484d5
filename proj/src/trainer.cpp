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

#include "spanet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "spanet/error.hpp"
#include "spanet/mesa.hpp"
#include "spanet/metrics.hpp"

namespace spanet {

namespace {

constexpr std::uint64_t kInitStream = 0x1f2e3d4c5b6a7988ULL;
constexpr std::uint64_t kShuffleStream = 0x5a5a5a5a12345678ULL;

std::string OptimizerName(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind ParseOptimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  ThrowUsage("unknown optimizer '" + name + "'");
}

std::string XiModeName(XiMode m) {
  return m == XiMode::kConstant ? "constant" : "ground-truth";
}

XiMode ParseXiMode(const std::string& name) {
  if (name == "constant") return XiMode::kConstant;
  if (name == "ground-truth") return XiMode::kGroundTruth;
  ThrowUsage("unknown xi mode '" + name + "'");
}

std::string ThresholdModeName(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::kRelative: return "relative";
    case ThresholdMode::kPercentile: return "percentile";
    case ThresholdMode::kFixed: return "fixed";
  }
  return "relative";
}

ThresholdMode ParseThresholdMode(const std::string& name) {
  if (name == "relative") return ThresholdMode::kRelative;
  if (name == "percentile") return ThresholdMode::kPercentile;
  if (name == "fixed") return ThresholdMode::kFixed;
  ThrowUsage("unknown threshold mode '" + name + "'");
}

}  // namespace

std::string LossModeName(LossMode mode) {
  switch (mode) {
    case LossMode::kL2: return "L2";
    case LossMode::kRankMep: return "Lr+Lmep";
    case LossMode::kL2Rank: return "L2+Lr";
    case LossMode::kL2RankMep: return "L2+Lr+Lmep";
  }
  return "L2";
}

LossMode ParseLossMode(const std::string& name) {
  if (name == "L2") return LossMode::kL2;
  if (name == "Lr+Lmep") return LossMode::kRankMep;
  if (name == "L2+Lr") return LossMode::kL2Rank;
  if (name == "L2+Lr+Lmep") return LossMode::kL2RankMep;
  ThrowUsage("unknown loss mode '" + name + "'");
}

bool UsesRanking(LossMode mode) { return mode != LossMode::kL2; }
bool UsesMep(LossMode mode) {
  return mode == LossMode::kRankMep || mode == LossMode::kL2RankMep;
}
bool UsesL2(LossMode mode) { return mode != LossMode::kRankMep; }

int ResolveBranches(const TrainConfig& cfg, int map_height, int map_width) {
  const int k = cfg.branches > 0 ? cfg.branches : std::max(1, map_height / 8);
  if (k > std::min(map_height, map_width) - 1) {
    ThrowUsage("branch count " + std::to_string(k) + " too large for a " +
               std::to_string(map_height) + "x" + std::to_string(map_width) + " map");
  }
  return k;
}

std::vector<double> ExponentialMovingAverage(std::span<const double> values,
                                             double alpha) {
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back(i == 0 ? values[0] : alpha * values[i] + (1.0 - alpha) * out.back());
  }
  return out;
}

LossReport TrainStep(ConvDensityModel& model, Optimizer& optimizer,
                     std::span<const Sample* const> batch, const TrainConfig& cfg,
                     StepTelemetry* telemetry) {
  if (batch.empty()) ThrowData("training step needs a non-empty batch");
  const std::size_t n = batch.size();
  const auto dn = static_cast<double>(n);

  // (a) forward on the incoming parameters.
  std::vector<ForwardPass> opening;
  opening.reserve(n);
  double mesa = 0.0;
  for (const Sample* s : batch) {
    opening.push_back(model.ForwardCached(s->image));
    RequireSameShape(opening.back().output(), s->gt, "training step");
    if (telemetry) telemetry->counts.push_back(TotalCount(opening.back().output()));
    if (cfg.mesa_diagnostic) mesa += MesaExcessExact(opening.back().output(), s->gt).value / dn;
  }

  std::vector<double> ranking;
  std::vector<DiscrepancyMask> masks;
  if (UsesRanking(cfg.loss_mode)) {
    const DensityMap& first = opening.front().output();
    const int k = ResolveBranches(cfg, first.height(), first.width());
    const BranchSchedule schedule =
        BuildBranchSchedule(first.height(), first.width(), k, cfg.anchor);
    RankConfig rank;
    rank.xi_mode = cfg.xi_mode;
    rank.xi = cfg.xi;
    rank.lr = cfg.lr;
    rank.weight = cfg.weights.ranking;
    rank.same_map_pooling = cfg.same_map_pooling;
    rank.dry_rank = cfg.dry_rank;
    ranking.assign(k, 0.0);
    for (const Sample* s : batch) {
      SubregionResult sub =
          GenerateSubregion(model, optimizer, s->image, schedule, rank, cfg.threshold, &s->gt);
      for (int b = 0; b < k; ++b) ranking[b] += sub.trace[b].ranking_loss / dn;
      if (telemetry) {
        ++telemetry->subregion_calls;
        telemetry->branch_traces.push_back(sub.trace);
      }
      masks.push_back(std::move(sub.fused));
    }
  }

  double mep = 0.0;
  if (UsesMep(cfg.loss_mode)) {
    GradientBuffer grads = model.MakeGradientBuffer();
    for (std::size_t i = 0; i < n; ++i) {
      const ForwardPass pass = model.ForwardCached(batch[i]->image);
      const DiscrepancyMask& mask = masks[i];
      DensityMap upstream = MepUpstream(pass.output(), batch[i]->gt, mask, n);
      mep += MepLoss(std::span(&pass.output(), 1), std::span(&batch[i]->gt, 1),
                     std::span(&mask, 1)) / dn;
      upstream *= cfg.weights.mep;
      model.BackwardAccumulate(pass, upstream, grads);
    }
    optimizer.Apply(model, grads, cfg.lr);
  }

  double l2 = 0.0;
  if (UsesL2(cfg.loss_mode)) {
    GradientBuffer grads = model.MakeGradientBuffer();
    const bool reuse = !UsesRanking(cfg.loss_mode);
    for (std::size_t i = 0; i < n; ++i) {
      const ForwardPass pass = reuse ? opening[i] : model.ForwardCached(batch[i]->image);
      l2 += L2Loss(std::span(&pass.output(), 1), std::span(&batch[i]->gt, 1)) / dn;
      DensityMap upstream = L2Upstream(pass.output(), batch[i]->gt, n);
      upstream *= cfg.weights.l2;
      model.BackwardAccumulate(pass, upstream, grads);
    }
    optimizer.Apply(model, grads, cfg.lr);
  }

  if (telemetry) {
    for (auto& m : masks) telemetry->masks.push_back(std::move(m));
  }
  return GlobalLoss(std::move(ranking), mep, l2, cfg.weights, mesa);
}

LossReport TrainStep(ConvDensityModel& model, Optimizer& optimizer,
                     const Sample& sample, const TrainConfig& cfg,
                     StepTelemetry* telemetry) {
  const Sample* ptr = &sample;
  return TrainStep(model, optimizer, std::span<const Sample* const>(&ptr, 1), cfg,
                   telemetry);
}

SplitEval EvaluateSplit(const ConvDensityModel& model, std::span<const Sample> split) {
  SplitEval eval;
  if (split.empty()) return eval;
  std::vector<double> truth;
  for (const Sample& s : split) {
    eval.estimated.push_back(TotalCount(model.Forward(s.image)));
    truth.push_back(s.count);
  }
  const CountErrors e = MaeMse(eval.estimated, truth);
  eval.mae = e.mae;
  eval.mse = e.mse;
  return eval;
}

ConvDensityModel MakeInitialModel(const TrainConfig& cfg) {
  ConvDensityModel model = ConvDensityModel::DeskDefault(cfg.output_stride);
  model.InitializeGaussian(0.0, cfg.init_std, cfg.seed ^ kInitStream);
  return model;
}

TrainReport Train(ConvDensityModel& model, const Dataset& dataset,
                  const TrainConfig& cfg) {
  if (dataset.train.empty()) ThrowData("training split is empty");
  if (cfg.epochs < 0 || cfg.batch_size < 1) ThrowUsage("invalid epoch or batch setting");
  const auto start = std::chrono::steady_clock::now();

  TrainReport report;
  Optimizer optimizer(cfg.optimizer);
  std::mt19937_64 rng(cfg.seed ^ kShuffleStream);
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    EpochRecord record;
    record.epoch = epoch;
    std::vector<double> est;
    std::vector<double> truth;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::vector<const Sample*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i) {
        batch.push_back(&dataset.train[order[i]]);
        truth.push_back(dataset.train[order[i]].count);
      }
      StepTelemetry telemetry;
      LossReport step = TrainStep(model, optimizer, batch, cfg, &telemetry);
      report.subregion_calls += telemetry.subregion_calls;
      est.insert(est.end(), telemetry.counts.begin(), telemetry.counts.end());
      record.l2 += step.l2;
      record.mep += step.mep;
      for (double r : step.ranking) record.ranking += r;
      record.global += step.global;
      ++steps;
      report.steps.push_back(std::move(step));
    }
    const double ds = static_cast<double>(steps);
    record.l2 /= ds;
    record.mep /= ds;
    record.ranking /= ds;
    record.global /= ds;
    const CountErrors train_err = MaeMse(est, truth);
    record.train_mae = train_err.mae;
    record.train_mse = train_err.mse;
    const SplitEval val = EvaluateSplit(model, dataset.val);
    record.val_mae = val.mae;
    record.val_mse = val.mse;
    report.epochs.push_back(record);
  }

  std::vector<double> train_mae;
  std::vector<double> val_mae;
  for (const EpochRecord& r : report.epochs) {
    train_mae.push_back(r.train_mae);
    val_mae.push_back(r.val_mae);
  }
  report.ema_train_mae = ExponentialMovingAverage(train_mae, cfg.ema_alpha);
  report.ema_val_mae = ExponentialMovingAverage(val_mae, cfg.ema_alpha);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string ToJson(const TrainConfig& cfg) {
  nlohmann::json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["optimizer"] = OptimizerName(cfg.optimizer);
  j["seed"] = cfg.seed;
  j["K"] = cfg.branches;
  j["anchor"] = AnchorName(cfg.anchor);
  j["same_map_pooling"] = cfg.same_map_pooling;
  j["dry_rank"] = cfg.dry_rank;
  j["loss_mode"] = LossModeName(cfg.loss_mode);
  j["weights"] = {cfg.weights.ranking, cfg.weights.mep, cfg.weights.l2};
  j["xi_mode"] = XiModeName(cfg.xi_mode);
  j["xi"] = cfg.xi;
  j["threshold"] = {{"mode", ThresholdModeName(cfg.threshold.mode)},
                    {"percentile", cfg.threshold.percentile},
                    {"delta", cfg.threshold.delta},
                    {"sigma", cfg.threshold.sigma}};
  j["init_std"] = cfg.init_std;
  j["output_stride"] = cfg.output_stride;
  j["ema_alpha"] = cfg.ema_alpha;
  j["mesa_diagnostic"] = cfg.mesa_diagnostic;
  return j.dump(2);
}

TrainConfig TrainConfigFromJson(const std::string& text) {
  TrainConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    ThrowData(std::string("malformed training config: ") + e.what());
  }
  try {
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
    if (j.contains("optimizer")) cfg.optimizer = ParseOptimizer(j["optimizer"].get<std::string>());
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("K")) cfg.branches = j["K"].get<int>();
    if (j.contains("anchor")) cfg.anchor = ParseAnchor(j["anchor"].get<std::string>());
    if (j.contains("same_map_pooling")) cfg.same_map_pooling = j["same_map_pooling"].get<bool>();
    if (j.contains("dry_rank")) cfg.dry_rank = j["dry_rank"].get<bool>();
    if (j.contains("loss_mode")) cfg.loss_mode = ParseLossMode(j["loss_mode"].get<std::string>());
    if (j.contains("weights")) {
      const auto w = j["weights"].get<std::vector<double>>();
      if (w.size() != 3) ThrowUsage("weights must have three entries (w_r, w_mep, w_l2)");
      cfg.weights = {w[0], w[1], w[2]};
    }
    if (j.contains("xi_mode")) cfg.xi_mode = ParseXiMode(j["xi_mode"].get<std::string>());
    if (j.contains("xi")) cfg.xi = j["xi"].get<double>();
    if (j.contains("threshold")) {
      const auto& t = j["threshold"];
      if (t.contains("mode")) cfg.threshold.mode = ParseThresholdMode(t["mode"].get<std::string>());
      if (t.contains("percentile")) cfg.threshold.percentile = t["percentile"].get<double>();
      if (t.contains("delta")) cfg.threshold.delta = t["delta"].get<double>();
      if (t.contains("sigma")) cfg.threshold.sigma = t["sigma"].get<double>();
    }
    if (j.contains("init_std")) cfg.init_std = j["init_std"].get<double>();
    if (j.contains("output_stride")) cfg.output_stride = j["output_stride"].get<int>();
    if (j.contains("ema_alpha")) cfg.ema_alpha = j["ema_alpha"].get<double>();
    if (j.contains("mesa_diagnostic")) cfg.mesa_diagnostic = j["mesa_diagnostic"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    ThrowData(std::string("invalid training config: ") + e.what());
  }
  if (cfg.xi < 0.0) ThrowUsage("xi must be non-negative");
  return cfg;
}

std::string ToJson(const TrainReport& report, bool include_steps) {
  nlohmann::json j;
  j["epochs"] = nlohmann::json::array();
  for (const EpochRecord& r : report.epochs) {
    j["epochs"].push_back({{"epoch", r.epoch},
                           {"train_mae", r.train_mae},
                           {"train_mse", r.train_mse},
                           {"val_mae", r.val_mae},
                           {"val_mse", r.val_mse},
                           {"l2", r.l2},
                           {"ranking", r.ranking},
                           {"mep", r.mep},
                           {"global", r.global}});
  }
  j["ema_train_mae"] = report.ema_train_mae;
  j["ema_val_mae"] = report.ema_val_mae;
  j["final_val_mae"] = report.final_val_mae();
  j["subregion_calls"] = report.subregion_calls;
  if (include_steps) {
    j["steps"] = nlohmann::json::array();
    for (const LossReport& s : report.steps) {
      j["steps"].push_back(nlohmann::json::parse(ToJson(s)));
    }
  }
  return j.dump(2);
}

std::string CurvesCsv(const TrainReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_mae,val_mae,ema_train_mae,ema_val_mae,train_mse,val_mse,l2,ranking,mep,global\n";
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    const EpochRecord& r = report.epochs[i];
    out << r.epoch << ',' << r.train_mae << ',' << r.val_mae << ','
        << report.ema_train_mae[i] << ',' << report.ema_val_mae[i] << ','
        << r.train_mse << ',' << r.val_mse << ',' << r.l2 << ',' << r.ranking << ','
        << r.mep << ',' << r.global << '\n';
  }
  return out.str();
}

}  // namespace spanet
