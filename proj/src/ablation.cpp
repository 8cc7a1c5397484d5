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

#include "spanet/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "spanet/error.hpp"

namespace spanet {

namespace {

struct Job {
  std::size_t row;
  std::size_t seed_index;
};

struct JobResult {
  double mae = 0.0;
  double mse = 0.0;
  double seconds = 0.0;
};

std::string FormatWeight(double w) {
  std::ostringstream out;
  out.precision(2);
  out << std::fixed << w;
  return out.str();
}

}  // namespace

std::string AblationAxisName(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kLossMode: return "loss_mode";
    case AblationAxis::kAnchor: return "anchor";
    case AblationAxis::kPooling: return "pooling";
    case AblationAxis::kBranches: return "K";
    case AblationAxis::kStride: return "stride";
    case AblationAxis::kWeights: return "weights";
  }
  return "loss_mode";
}

AblationAxis ParseAblationAxis(const std::string& name) {
  if (name == "loss_mode") return AblationAxis::kLossMode;
  if (name == "anchor") return AblationAxis::kAnchor;
  if (name == "pooling") return AblationAxis::kPooling;
  if (name == "K") return AblationAxis::kBranches;
  if (name == "stride") return AblationAxis::kStride;
  if (name == "weights") return AblationAxis::kWeights;
  ThrowUsage("unknown ablation axis '" + name + "'");
}

double Median(std::span<const double> values) {
  if (values.empty()) ThrowData("median of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<AblationVariant> AblationVariants(const AblationSpec& spec) {
  std::vector<AblationVariant> out;
  const TrainConfig& base = spec.base;
  switch (spec.axis) {
    case AblationAxis::kLossMode:
      for (LossMode m : {LossMode::kL2, LossMode::kL2Rank, LossMode::kRankMep,
                         LossMode::kL2RankMep}) {
        TrainConfig c = base;
        c.loss_mode = m;
        out.push_back({LossModeName(m), c});
      }
      break;
    case AblationAxis::kAnchor:
      for (Anchor a : {Anchor::kCenter, Anchor::kTopLeft, Anchor::kBottomLeft,
                       Anchor::kTopRight, Anchor::kBottomRight}) {
        TrainConfig c = base;
        c.anchor = a;
        out.push_back({AnchorName(a), c});
      }
      break;
    case AblationAxis::kPooling:
      for (bool same : {false, true}) {
        TrainConfig c = base;
        c.same_map_pooling = same;
        out.push_back({same ? "same-map" : "different-map", c});
      }
      break;
    case AblationAxis::kBranches: {
      const int stride = std::max(1, base.output_stride);
      const int h = (spec.suite.height + stride - 1) / stride;
      std::vector<int> ks = spec.branch_values;
      if (ks.empty()) ks = {1, h / 16, h / 8, h / 4, h / 2};
      for (int k : ks) {
        TrainConfig c = base;
        c.branches = std::max(1, k);
        out.push_back({"K=" + std::to_string(c.branches), c});
      }
      break;
    }
    case AblationAxis::kStride:
      for (int s : spec.stride_values) {
        TrainConfig c = base;
        c.output_stride = s;
        out.push_back({"stride=" + std::to_string(s), c});
      }
      break;
    case AblationAxis::kWeights: {
      out.push_back({"unit", base});
      std::mt19937_64 rng(base.seed ^ 0x77e1ULL);
      std::uniform_int_distribution<int> tenth(1, 10);
      for (int i = 0; i < spec.random_weight_draws; ++i) {
        TrainConfig c = base;
        c.weights = {tenth(rng) / 10.0, tenth(rng) / 10.0, tenth(rng) / 10.0};
        out.push_back({"w=(" + FormatWeight(c.weights.ranking) + "," +
                           FormatWeight(c.weights.mep) + "," + FormatWeight(c.weights.l2) + ")",
                       c});
      }
      break;
    }
  }
  return out;
}

AblationTable RunAblation(const AblationSpec& spec) {
  if (spec.seeds.empty()) ThrowUsage("ablation needs at least one seed");
  const std::vector<AblationVariant> variants = AblationVariants(spec);

  AblationTable table;
  table.axis = AblationAxisName(spec.axis);
  for (const AblationVariant& v : variants) {
    AblationRow row;
    row.label = v.label;
    row.config = v.config;
    row.seeds = spec.seeds;
    row.val_mae.assign(spec.seeds.size(), 0.0);
    row.val_mse.assign(spec.seeds.size(), 0.0);
    row.seconds.assign(spec.seeds.size(), 0.0);
    table.rows.push_back(std::move(row));
  }

  std::vector<Job> jobs;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) jobs.push_back({r, s});
  }
  std::vector<JobResult> results(jobs.size());

  auto run_job = [&](std::size_t index) {
    const Job& job = jobs[index];
    TrainConfig cfg = table.rows[job.row].config;
    cfg.seed = spec.seeds[job.seed_index];
    SuiteSpec suite = spec.suite;
    suite.seed = cfg.seed;
    suite.output_stride = cfg.output_stride;
    const Dataset data = MakeSyntheticSuite(suite);
    ConvDensityModel model = MakeInitialModel(cfg);
    const TrainReport report = Train(model, data, cfg);
    if (spec.on_run) spec.on_run(table.rows[job.row].label, cfg.seed, report);
    results[index] = {report.epochs.empty() ? 0.0 : report.epochs.back().val_mae,
                      report.epochs.empty() ? 0.0 : report.epochs.back().val_mse,
                      report.seconds};
  };

  const int workers = std::max(1, std::min<int>(spec.workers, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    AblationRow& row = table.rows[jobs[i].row];
    row.val_mae[jobs[i].seed_index] = results[i].mae;
    row.val_mse[jobs[i].seed_index] = results[i].mse;
    row.seconds[jobs[i].seed_index] = results[i].seconds;
  }
  for (AblationRow& row : table.rows) {
    row.median_mae = Median(row.val_mae);
    row.median_mse = Median(row.val_mse);
  }
  return table;
}

std::string ToJson(const AblationTable& table) {
  nlohmann::json j;
  j["axis"] = table.axis;
  j["rows"] = nlohmann::json::array();
  for (const AblationRow& r : table.rows) {
    j["rows"].push_back({{"label", r.label},
                         {"seeds", r.seeds},
                         {"val_mae", r.val_mae},
                         {"val_mse", r.val_mse},
                         {"median_mae", r.median_mae},
                         {"median_mse", r.median_mse},
                         {"config", nlohmann::json::parse(ToJson(r.config))}});
  }
  return j.dump(2);
}

std::string ToCsv(const AblationTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "axis,label,median_mae,median_mse";
  const std::size_t n = table.rows.empty() ? 0 : table.rows.front().seeds.size();
  for (std::size_t s = 0; s < n; ++s) out << ",mae_seed" << table.rows.front().seeds[s];
  out << '\n';
  for (const AblationRow& r : table.rows) {
    out << table.axis << ',' << r.label << ',' << r.median_mae << ',' << r.median_mse;
    for (double v : r.val_mae) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

HalfBias EvaluateHalfBias(const ConvDensityModel& model, std::span<const Sample> split) {
  HalfBias bias;
  if (split.empty()) return bias;
  for (const Sample& s : split) {
    const DensityMap pred = model.Forward(s.image);
    RequireSameShape(pred, s.gt, "half bias");
    const int mid = pred.width() / 2;
    for (int r = 0; r < pred.height(); ++r) {
      for (int c = 0; c < pred.width(); ++c) {
        const double d = pred(r, c) - s.gt(r, c);
        (c < mid ? bias.left : bias.right) += d;
      }
    }
  }
  bias.left /= static_cast<double>(split.size());
  bias.right /= static_cast<double>(split.size());
  return bias;
}

}  // namespace spanet
