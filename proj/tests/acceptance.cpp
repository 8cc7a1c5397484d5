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

// Acceptance run: one PASS/FAIL line per criterion, details in a JSON report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "golden_trace.hpp"
#include "json.hpp"
#include "spanet/ablation.hpp"
#include "spanet/density_map.hpp"
#include "spanet/driver.hpp"
#include "spanet/losses.hpp"
#include "spanet/mesa.hpp"
#include "spanet/metrics.hpp"
#include "spanet/subregion.hpp"
#include "spanet/synth.hpp"
#include "spanet/trainer.hpp"

using namespace spanet;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
  json data;
};

DensityMap RandomMap(std::mt19937_64& rng, int h, int w, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (double& x : v) x = u(rng);
  return DensityMap(h, w, std::move(v));
}

std::string Fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------- MESA

double NaiveMesa(const DensityMap& p, const DensityMap& g) {
  double best = 0.0;
  for (int t = 0; t < p.height(); ++t)
    for (int b = t; b < p.height(); ++b)
      for (int l = 0; l < p.width(); ++l)
        for (int r = l; r < p.width(); ++r) {
          double s = 0.0;
          for (int y = t; y <= b; ++y)
            for (int x = l; x <= r; ++x) s += p(y, x) - g(y, x);
          best = std::max(best, std::fabs(s));
        }
  return best;
}

Verdict MesaOracle() {
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<int> dim(1, 12);
  const auto start = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const int h = dim(rng), w = dim(rng);
    const DensityMap p = RandomMap(rng, h, w, 0.0, 1.0), g = RandomMap(rng, h, w, 0.0, 1.0);
    worst = std::max(worst, std::fabs(MesaExcessExact(p, g).value - NaiveMesa(p, g)));
  }
  const double secs = Seconds(start);
  Verdict v;
  v.pass = worst <= 1e-9 && secs < 10.0;
  v.detail = "500 pairs up to 12x12, max |dp - brute| = " + Fmt(worst) + ", " + Fmt(secs, 3) + " s";
  v.data = {{"pairs", 500}, {"max_abs_diff", worst}, {"seconds", secs}};
  return v;
}

Verdict MesaUpperBound() {
  std::mt19937_64 rng(20260102);
  std::uniform_int_distribution<int> dim(1, 32);
  int violations = 0;
  double min_slack = 1e300;
  for (int i = 0; i < 200; ++i) {
    const int h = dim(rng), w = dim(rng);
    const DensityMap p = RandomMap(rng, h, w, 0.0, 0.2), g = RandomMap(rng, h, w, 0.0, 0.2);
    const double value = MesaExcessExact(p, g).value;
    const double gap = std::fabs(TotalCount(p) - TotalCount(g));
    min_slack = std::min(min_slack, value - gap);
    // Both sides sum the full map; allow only summation rounding.
    if (value < gap - 1e-12 * (1.0 + gap)) ++violations;
  }
  Verdict v;
  v.pass = violations == 0;
  v.detail = "200 pairs, violations = " + std::to_string(violations) + ", min slack " + Fmt(min_slack);
  v.data = {{"pairs", 200}, {"violations", violations}, {"min_slack", min_slack}};
  return v;
}

// ---------------------------------------------------------------- gradients

// ReLU on/off pattern of every hidden unit, from a direct loop forward.
std::vector<bool> ReluPattern(const ConvDensityModel& model, const Image& img) {
  const int h = img.height(), w = img.width();
  std::vector<double> act(img.values().begin(), img.values().end());
  std::vector<bool> pattern;
  const auto p = model.parameters();
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const LayerSpec& L = model.layers()[l];
    const std::size_t off = model.layer_offset(l);
    const int k = L.kernel_size, pad = k / 2;
    std::vector<double> out(static_cast<std::size_t>(L.out_channels) * h * w);
    for (int o = 0; o < L.out_channels; ++o)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = p[off + static_cast<std::size_t>(L.out_channels) * L.in_channels * k * k + o];
          for (int i = 0; i < L.in_channels; ++i)
            for (int dy = 0; dy < k; ++dy)
              for (int dx = 0; dx < k; ++dx) {
                const int yy = y + dy - pad, xx = x + dx - pad;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                s += p[off + ((static_cast<std::size_t>(o) * L.in_channels + i) * k + dy) * k + dx] *
                     act[(static_cast<std::size_t>(i) * h + yy) * w + xx];
              }
          if (L.activation == Activation::kRelu) {
            pattern.push_back(s > 0.0);
            s = std::max(0.0, s);
          }
          out[(static_cast<std::size_t>(o) * h + y) * w + x] = s;
        }
    act = std::move(out);
  }
  return pattern;
}

struct GradCheck {
  double rel = 0.0;
  int used = 0;
  int excluded = 0;
};

// Central differences with step 1e-4 over every parameter. Coordinates whose
// perturbation crosses a kink (ReLU pattern or loss branch changes) are left
// out.
GradCheck CheckGradient(ConvDensityModel& model, const Image& img, const GradientBuffer& analytic,
                        const std::function<double()>& loss, const std::function<int()>& branch) {
  const double h = 1e-4;
  std::vector<double> theta(model.parameters().begin(), model.parameters().end());
  double num = 0.0, na = 0.0, nf = 0.0;
  GradCheck out;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::vector<double> t = theta;
    t[i] = theta[i] + h;
    model.SetParameters(t);
    const double up = loss();
    const auto pat_up = ReluPattern(model, img);
    const int br_up = branch();
    t[i] = theta[i] - h;
    model.SetParameters(t);
    const double down = loss();
    const auto pat_down = ReluPattern(model, img);
    const int br_down = branch();
    if (pat_up != pat_down || br_up != br_down) {
      ++out.excluded;
      continue;
    }
    const double fd = (up - down) / (2 * h);
    const double a = analytic.values[i];
    num += (fd - a) * (fd - a);
    na += a * a;
    nf += fd * fd;
    ++out.used;
  }
  model.SetParameters(theta);
  out.rel = std::sqrt(num) / std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
  return out;
}

Verdict GradientFidelity() {
  std::mt19937_64 rng(20260103);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 10;
  double worst[3] = {0.0, 0.0, 0.0};
  int used = 0, excluded = 0;
  for (int point = 0; point < 20; ++point) {
    ConvDensityModel model = ConvDensityModel::DeskDefault();
    model.InitializeGaussian(0.0, 0.3, 1000 + point);
    std::vector<double> pix(n * n);
    for (double& x : pix) x = unit(rng);
    const Image img(1, n, n, pix);
    const DensityMap gt = RandomMap(rng, n, n, 0.0, 0.1);
    std::vector<double> mv(n * n);
    for (double& x : mv) x = unit(rng);
    const DiscrepancyMask mask(n, n, mv);
    // SetParameters invalidates cached passes, so each block runs its own.
    const DensityMap pred = model.Forward(img);

    // L2
    {
      const GradientBuffer g = model.Backward(model.ForwardCached(img), L2Upstream(pred, gt, 1));
      const GradCheck c = CheckGradient(
          model, img, g, [&] { return L2Loss(std::vector{model.Forward(img)}, std::vector{gt}); },
          [] { return 0; });
      worst[0] = std::max(worst[0], c.rel);
      used += c.used;
      excluded += c.excluded;
    }
    // Ranking hinge of pooled counts, kept well inside its active branch.
    {
      const int k = 1 + point % 3;
      const BranchSchedule s = BuildBranchSchedule(n, n, k, static_cast<Anchor>(point % 5));
      const int b = point % k;
      const PatchMask inner = s.inner(b), outer = s.outer(b);
      const double c1 = MaskPoolCount(pred, inner), c2 = MaskPoolCount(pred, outer);
      const RankingLossConfig cfg{std::fabs(c1 - c2) + 1.0};
      DensityMap up(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) up(r, c) = (inner.at(r, c) ? 1.0 : 0.0) - (outer.at(r, c) ? 1.0 : 0.0);
      const GradientBuffer g = model.Backward(model.ForwardCached(img), up);
      auto counts = [&] {
        const DensityMap d = model.Forward(img);
        return std::pair{MaskPoolCount(d, inner), MaskPoolCount(d, outer)};
      };
      const GradCheck c = CheckGradient(
          model, img, g,
          [&] {
            const auto [a, o] = counts();
            return RankingHinge(a, o, cfg);
          },
          [&] {
            const auto [a, o] = counts();
            return RankingHingeActive(a, o, cfg) ? 1 : 0;
          });
      worst[1] = std::max(worst[1], c.rel);
      used += c.used;
      excluded += c.excluded;
    }
    // MEP
    {
      const GradientBuffer g = model.Backward(model.ForwardCached(img), MepUpstream(pred, gt, mask, 1));
      auto excess = [&] {
        const DensityMap d = model.Forward(img);
        double e = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) e += mask.values()[i] * (d.values()[i] - gt.values()[i]);
        return e;
      };
      const GradCheck c = CheckGradient(
          model, img, g,
          [&] { return MepLoss(std::vector{model.Forward(img)}, std::vector{gt}, std::vector{mask}); },
          [&] { return excess() > 0.0 ? 1 : 0; });
      worst[2] = std::max(worst[2], c.rel);
      used += c.used;
      excluded += c.excluded;
    }
  }
  Verdict v;
  v.pass = worst[0] < 1e-4 && worst[1] < 1e-4 && worst[2] < 1e-4;
  v.detail = "20 points each, worst relative error L2 " + Fmt(worst[0]) + ", hinge " + Fmt(worst[1]) + ", MEP " +
             Fmt(worst[2]) + " (" + std::to_string(excluded) + " kink-adjacent coordinates skipped)";
  v.data = {{"points_per_loss", 20}, {"step", 1e-4},       {"worst_l2", worst[0]},
            {"worst_hinge", worst[1]}, {"worst_mep", worst[2]}, {"coordinates_used", used},
            {"coordinates_excluded", excluded}};
  return v;
}

// ---------------------------------------------------------------- dead zone

Verdict HingeDeadZone() {
  std::mt19937_64 rng(20260104);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int inactive = 0, active = 0, bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    ConvDensityModel model = ConvDensityModel::DeskDefault();
    model.InitializeGaussian(0.0, 0.2, 5000 + trial);
    const ConvDensityModel before = model;
    const int n = 12;
    std::vector<double> pix(n * n);
    for (double& x : pix) x = unit(rng);
    Optimizer opt(trial % 2 ? OptimizerKind::kAdam : OptimizerKind::kSgd);
    RankConfig rank;
    rank.xi = trial % 4 == 0 ? 0.5 : 0.0;
    rank.lr = 0.01;
    const int k = 1 + trial % 5;
    const SubregionResult r = GenerateSubregion(model, opt, Image(1, n, n, pix),
                                                BuildBranchSchedule(n, n, k, static_cast<Anchor>(trial % 5)), rank,
                                                ThresholdConfig{});
    int trial_active = 0;
    for (int b = 0; b < k; ++b) {
      if (r.trace[b].active) {
        ++trial_active;
        continue;
      }
      ++inactive;
      double mx = 0.0;
      for (double s : r.per_branch[b].values()) mx = std::max(mx, s);
      if (mx >= 1e-4 || r.trace[b].max_change != 0.0 || r.trace[b].ranking_loss != 0.0) ++bad;
    }
    active += trial_active;
    if (opt.steps() != static_cast<std::uint64_t>(trial_active)) ++bad;
    if (trial_active == 0 && !(model == before)) ++bad;
  }
  Verdict v;
  v.pass = bad == 0 && inactive >= 100;
  v.detail = std::to_string(inactive) + " inactive branches (" + std::to_string(active) +
             " active) over 200 runs, violations = " + std::to_string(bad);
  v.data = {{"inactive_branches", inactive}, {"active_branches", active}, {"violations", bad}};
  return v;
}

// ---------------------------------------------------------------- counts

Verdict CountConservation() {
  std::mt19937_64 rng(20260105);
  std::uniform_int_distribution<int> npts(0, 120), dim(8, 96);
  std::uniform_real_distribution<double> sig(0.5, 6.0);
  double worst = 0.0;
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const int h = dim(rng), w = dim(rng), n = npts(rng);
    std::uniform_real_distribution<double> ry(0.0, std::nextafter(h, 0.0)), rx(0.0, std::nextafter(w, 0.0));
    PointAnnotationSet ann(h, w);
    for (int j = 0; j < n; ++j) ann.Add({ry(rng), rx(rng)});
    const double err = std::fabs(TotalCount(RenderGroundTruth(ann, sig(rng), 1)) - n);
    worst = std::max(worst, err / std::max(1, n));
    if (err > 1e-6 * n) ++bad;
  }
  Verdict v;
  v.pass = bad == 0;
  v.detail = "100 annotation sets, worst |sum - count| / count = " + Fmt(worst);
  v.data = {{"sets", 100}, {"worst_relative", worst}, {"violations", bad}};
  return v;
}

// ---------------------------------------------------------------- golden

Verdict GoldenTrace() {
  const golden::Outcome o = golden::Replay(SPANET_GOLDEN_DIR "/trace_k2.json");
  Verdict v;
  v.pass = o.structural == 0 && o.max_abs <= 1e-9 && o.max_rel <= 1e-9;
  v.detail = "K=2 subregion pass + one train step, max deviation " + Fmt(o.max_abs) + ", branch flags " +
             (o.structural == 0 ? "identical" : "differ");
  v.data = {{"max_abs", o.max_abs}, {"max_rel", o.max_rel}, {"structural_mismatches", o.structural}};
  return v;
}

// ---------------------------------------------------------------- metrics

Verdict MetricSelfTests() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const CountErrors e = MaeMse(std::vector{1.0, 5.0}, std::vector{2.0, 2.0});
  expect(std::fabs(e.mae - 2.0) <= 1e-9 && std::fabs(e.mse - std::sqrt(5.0)) <= 1e-9, "mae/mse hand values");
  const CountErrors z = MaeMse(std::vector{3.0}, std::vector{1.0});
  expect(z.mae == 2.0 && z.mse == 2.0, "single pair");

  std::mt19937_64 rng(20260106);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(9), b(9);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (double& x : a) x = u(rng);
    for (double& x : b) x = u(rng);
    double mae = 0.0, mse = 0.0;
    for (int i = 0; i < 9; ++i) {
      mae += std::fabs(a[i] - b[i]) / 9.0;
      mse += (a[i] - b[i]) * (a[i] - b[i]) / 9.0;
    }
    const CountErrors r = MaeMse(a, b);
    expect(std::fabs(r.mae - mae) <= 1e-9 && std::fabs(r.mse - std::sqrt(mse)) <= 1e-9, "mae/mse loop oracle");
  }

  expect(Psnr(DensityMap(5, 5, 1.0), DensityMap(5, 5, 1.0)) == kPsnrCapDb, "psnr cap");
  expect(std::fabs(Psnr(DensityMap(5, 5, 1.0), DensityMap(5, 5, 0.9)) - 20.0) <= 1e-9, "psnr 20 dB");
  {
    const DensityMap base = RandomMap(rng, 16, 16, 0.0, 1.0);
    double last = 1e300;
    for (double level : {0.01, 0.1, 1.0}) {
      DensityMap other = base;
      for (double& x : other.values()) x += level;
      const double p = Psnr(other, base);
      expect(p < last, "psnr monotone");
      last = p;
    }
  }

  auto ssim_oracle = [](const DensityMap& a, const DensityMap& b) {
    double g[11], s = 0.0;
    for (int i = 0; i < 11; ++i) s += g[i] = std::exp(-(i - 5) * (i - 5) / 4.5);
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < a.size(); ++i) {
      lo = std::min({lo, a.values()[i], b.values()[i]});
      hi = std::max({hi, a.values()[i], b.values()[i]});
    }
    const double L = std::max(hi - lo, 1e-12), c1 = 1e-4 * L * L, c2 = 9e-4 * L * L;
    double total = 0.0;
    int n = 0;
    for (int t = 0; t + 11 <= a.height(); ++t)
      for (int l = 0; l + 11 <= a.width(); ++l) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = g[i] * g[j] / (s * s), x = a(t + i, l + j), y = b(t + i, l + j);
            mx += w * x;
            my += w * y;
            xx += w * x * x;
            yy += w * y * y;
            xy += w * x * y;
          }
        total += (2 * mx * my + c1) * (2 * (xy - mx * my) + c2) /
                 ((mx * mx + my * my + c1) * (xx - mx * mx + yy - my * my + c2));
        ++n;
      }
    return total / n;
  };
  for (int t = 0; t < 10; ++t) {
    const DensityMap a = RandomMap(rng, 11 + t, 20 - t, 0.0, 0.1);
    const DensityMap b = RandomMap(rng, 11 + t, 20 - t, 0.0, 0.1);
    expect(std::fabs(Ssim(a, b) - ssim_oracle(a, b)) <= 1e-9, "ssim reference loop");
    expect(Ssim(a, a) == 1.0, "ssim(a, a) = 1");
    expect(Ssim(a, b) == Ssim(b, a), "ssim symmetry");
  }
  Verdict v;
  v.pass = failures.empty();
  v.detail = failures.empty() ? "hand values, reference loops, ssim(a,a)=1, psnr monotone" : "failed: " + failures[0];
  v.data = {{"failures", failures}};
  return v;
}

// ---------------------------------------------------------------- training

// Training setup shared by the directional replications.
TrainConfig DirectionalConfig(LossMode mode) {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.loss_mode = mode;
  cfg.lr = 3e-4;  // constant xi = 0, unit weights
  return cfg;
}

SuiteSpec DeskSuite() {
  SuiteSpec s;  // 64x64, 10-60 heads, 200 train / 50 val
  return s;
}

SuiteSpec FailureSuite() {
  SuiteSpec s;
  // Crowded enough that occluding plateaus overlap summed blobs.
  s.min_heads = 40;
  s.max_heads = 120;
  s.gradient = DensityGradient::kLeftDense;
  s.noise.zero_mean_std = 0.05;
  s.noise.size_jitter = 0.2;
  s.noise.occlusion_rate = 1.0;
  return s;
}

struct RunResult {
  double val_mae = 0.0;
  double seconds = 0.0;
  HalfBias bias;
};

class Runner {
 public:
  RunResult Run(const SuiteSpec& suite_in, const TrainConfig& cfg_in, std::uint64_t seed) {
    TrainConfig cfg = cfg_in;
    cfg.seed = seed;
    SuiteSpec suite = suite_in;
    suite.seed = seed;
    suite.output_stride = cfg.output_stride;
    // Auto K and its resolved value share a cache entry.
    const int map_h = (suite.height + cfg.output_stride - 1) / cfg.output_stride;
    const int map_w = (suite.width + cfg.output_stride - 1) / cfg.output_stride;
    cfg.branches = ResolveBranches(cfg, map_h, map_w);
    const std::string key = ToJson(cfg) + ToJson(suite);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const Dataset data = MakeSyntheticSuite(suite);
    ConvDensityModel model = MakeInitialModel(cfg);
    const TrainReport report = Train(model, data, cfg);
    RunResult r{report.final_val_mae(), report.seconds, EvaluateHalfBias(model, data.val)};
    std::fprintf(stderr, "  [run] %s K=%d seed %llu: val MAE %.4f (%.0f s)\n", LossModeName(cfg.loss_mode).c_str(),
                 cfg.branches, static_cast<unsigned long long>(seed), r.val_mae, r.seconds);
    cache_[key] = r;
    return r;
  }

 private:
  std::map<std::string, RunResult> cache_;
};

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct ModeStats {
  std::vector<double> mae;
  double seconds = 0.0;
  double median = 0.0;
};

ModeStats RunMode(Runner& runner, const SuiteSpec& suite, const TrainConfig& cfg) {
  ModeStats s;
  for (std::uint64_t seed : kSeeds) {
    const RunResult r = runner.Run(suite, cfg, seed);
    s.mae.push_back(r.val_mae);
    s.seconds += r.seconds;
  }
  s.median = Median(s.mae);
  return s;
}

Verdict LossModeDirection(Runner& runner) {
  std::map<std::string, ModeStats> stats;
  json rows = json::array();
  bool fast = true;
  for (LossMode m : {LossMode::kL2, LossMode::kL2Rank, LossMode::kRankMep, LossMode::kL2RankMep}) {
    const ModeStats s = RunMode(runner, DeskSuite(), DirectionalConfig(m));
    stats[LossModeName(m)] = s;
    fast = fast && s.seconds < 1800.0;
    rows.push_back({{"mode", LossModeName(m)}, {"val_mae", s.mae}, {"median", s.median}, {"seconds", s.seconds}});
  }
  const double l2 = stats["L2"].median, full = stats["L2+Lr+Lmep"].median;
  const double gain_rank = l2 - stats["L2+Lr"].median;
  const bool middle = gain_rank < l2 - full && gain_rank < l2 - stats["Lr+Lmep"].median;
  int wins = 0;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) wins += stats["L2+Lr+Lmep"].mae[i] < stats["L2"].mae[i] ? 1 : 0;
  Verdict v;
  v.pass = full < l2 && fast;
  v.detail = "median val MAE L2 " + Fmt(l2) + ", L2+Lr " + Fmt(stats["L2+Lr"].median) + ", Lr+Lmep " +
             Fmt(stats["Lr+Lmep"].median) + ", L2+Lr+Lmep " + Fmt(full) + "; middle ordering " +
             (middle ? "holds" : "does not hold") + " (not gating); full mode wins " + std::to_string(wins) +
             "/5 seeds" + (fast ? "" : "; a mode exceeded 30 min");
  v.data = {{"rows", rows}, {"middle_ordering_holds", middle}, {"full_mode_seed_wins", wins}};
  return v;
}

Verdict KSweep(Runner& runner) {
  const int h = DeskSuite().height;
  const std::vector<int> ks{1, h / 16, h / 8, h / 4, h / 2};
  json rows = json::array();
  std::vector<double> medians;
  for (int k : ks) {
    TrainConfig cfg = DirectionalConfig(LossMode::kL2RankMep);
    cfg.branches = k;
    const ModeStats s = RunMode(runner, DeskSuite(), cfg);
    medians.push_back(s.median);
    rows.push_back({{"K", k}, {"val_mae", s.mae}, {"median", s.median}, {"seconds", s.seconds}});
  }
  const std::size_t best = std::min_element(medians.begin(), medians.end()) - medians.begin();
  Verdict v;
  v.pass = best != 0 && best != ks.size() - 1;
  std::string line;
  for (std::size_t i = 0; i < ks.size(); ++i) line += (i ? ", K=" : "K=") + std::to_string(ks[i]) + " " + Fmt(medians[i]);
  v.detail = "median val MAE " + line + "; best K=" + std::to_string(ks[best]);
  v.data = {{"rows", rows}, {"best_K", ks[best]}};
  return v;
}

Verdict FailureMode(Runner& runner) {
  json rows = json::array();
  std::map<std::string, std::vector<HalfBias>> biases;
  for (LossMode m : {LossMode::kL2, LossMode::kL2RankMep}) {
    for (std::uint64_t seed : kSeeds) {
      const RunResult r = runner.Run(FailureSuite(), DirectionalConfig(m), seed);
      biases[LossModeName(m)].push_back(r.bias);
      rows.push_back({{"mode", LossModeName(m)}, {"seed", seed}, {"dense_half", r.bias.left},
                      {"sparse_half", r.bias.right}, {"val_mae", r.val_mae}});
    }
  }
  int pattern = 0;
  for (const HalfBias& b : biases["L2"]) pattern += (b.left < 0.0 && b.right > 0.0) ? 1 : 0;
  auto median_abs = [&](const std::string& mode, bool left) {
    std::vector<double> v;
    for (const HalfBias& b : biases[mode]) v.push_back(std::fabs(left ? b.left : b.right));
    return Median(v);
  };
  const double l2_dense = median_abs("L2", true), l2_sparse = median_abs("L2", false);
  const double sp_dense = median_abs("L2+Lr+Lmep", true), sp_sparse = median_abs("L2+Lr+Lmep", false);
  Verdict v;
  v.pass = pattern >= 3 && sp_dense < l2_dense && sp_sparse < l2_sparse;
  v.detail = "L2 under/over pattern in " + std::to_string(pattern) + "/5 seeds; median |bias| dense " + Fmt(l2_dense) +
             " -> " + Fmt(sp_dense) + ", sparse " + Fmt(l2_sparse) + " -> " + Fmt(sp_sparse);
  v.data = {{"rows", rows},
            {"l2_pattern_seeds", pattern},
            {"median_abs_dense", {l2_dense, sp_dense}},
            {"median_abs_sparse", {l2_sparse, sp_sparse}}};
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spanet acceptance run"};
  std::string only;
  std::string report_path = "acceptance_report.json";
  app.add_option("--only", only, "comma-separated criterion ids");
  app.add_option("--report", report_path, "JSON report path");
  CLI11_PARSE(app, argc, argv);

  std::set<std::string> selected;
  {
    std::stringstream ss(only);
    std::string id;
    while (std::getline(ss, id, ',')) {
      if (!id.empty()) selected.insert(id);
    }
  }

  Runner runner;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"mesa-oracle", MesaOracle},
      {"mesa-upper-bound", MesaUpperBound},
      {"gradient-fidelity", GradientFidelity},
      {"hinge-dead-zone", HingeDeadZone},
      {"count-conservation", CountConservation},
      {"golden-trace", GoldenTrace},
      {"loss-mode-direction", [&] { return LossModeDirection(runner); }},
      {"k-sweep-interior", [&] { return KSweep(runner); }},
      {"metric-self-tests", MetricSelfTests},
      {"failure-mode", [&] { return FailureMode(runner); }},
  };

  json report;
  report["criteria"] = json::array();
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("error: ") + e.what();
    }
    const double secs = Seconds(start);
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", id.c_str(), v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
    report["criteria"].push_back(
        {{"id", id}, {"pass", v.pass}, {"detail", v.detail}, {"seconds", secs}, {"data", v.data}});
  }
  std::ofstream(report_path) << report.dump(2) << "\n";
  return failed == 0 ? 0 : 1;
}
