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

#include "spanet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "spanet/error.hpp"

namespace spanet {

namespace {

constexpr int kPlacementAttempts = 100;
constexpr double kLeftDenseShare = 0.8;

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return SplitMix(SplitMix(base ^ (stream * 0x632be59bd9b4e019ULL)) + index);
}

void AddBlob(DensityMap& image, Point p, double radius, double amplitude) {
  const double reach = 4.0 * radius;
  const int r0 = std::max(0, static_cast<int>(std::ceil(p.row - reach)));
  const int r1 = std::min(image.height() - 1, static_cast<int>(std::floor(p.row + reach)));
  const int c0 = std::max(0, static_cast<int>(std::ceil(p.col - reach)));
  const int c1 = std::min(image.width() - 1, static_cast<int>(std::floor(p.col + reach)));
  const double inv = 1.0 / (2.0 * radius * radius);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dr = r - p.row;
      const double dc = c - p.col;
      image(r, c) += amplitude * std::exp(-(dr * dr + dc * dc) * inv);
    }
  }
}

Point SamplePosition(const SceneSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = spec.height;
  const double w = spec.width;
  switch (spec.gradient) {
    case DensityGradient::kUniform:
      return {unit(rng) * h, unit(rng) * w};
    case DensityGradient::kLeftDense: {
      const double row = unit(rng) * h;
      const double half = w / 2.0;
      const double col = unit(rng) < kLeftDenseShare ? unit(rng) * half
                                                     : half + unit(rng) * (w - half);
      return {row, col};
    }
    case DensityGradient::kRadial: {
      std::normal_distribution<double> normal(0.0, std::min(h, w) / 5.0);
      for (;;) {
        const double row = h / 2.0 + normal(rng);
        const double col = w / 2.0 + normal(rng);
        if (row >= 0.0 && row < h && col >= 0.0 && col < w) return {row, col};
      }
    }
  }
  return {0.0, 0.0};
}

double MinDistance(Point p, const std::vector<Point>& placed) {
  double best = std::numeric_limits<double>::infinity();
  for (const Point& q : placed) {
    best = std::min(best, std::hypot(p.row - q.row, p.col - q.col));
  }
  return best;
}

}  // namespace

std::string DensityGradientName(DensityGradient g) {
  switch (g) {
    case DensityGradient::kUniform: return "uniform";
    case DensityGradient::kLeftDense: return "left-dense";
    case DensityGradient::kRadial: return "radial";
  }
  return "uniform";
}

DensityGradient ParseDensityGradient(const std::string& name) {
  if (name == "uniform") return DensityGradient::kUniform;
  if (name == "left-dense") return DensityGradient::kLeftDense;
  if (name == "radial") return DensityGradient::kRadial;
  ThrowUsage("unknown density gradient '" + name + "'");
}

Scene GenerateScene(const SceneSpec& spec) {
  if (spec.height < 1 || spec.width < 1) ThrowUsage("scene dimensions must be positive");
  if (spec.n_heads < 0) ThrowUsage("head count must be non-negative");
  if (!(spec.head_sigma > 0.0)) ThrowUsage("head sigma must be positive");

  std::mt19937_64 rng(spec.seed);
  const double separation = std::max(1.0, spec.head_sigma / 2.0);
  std::vector<Point> placed;
  bool warning = false;
  for (int i = 0; i < spec.n_heads; ++i) {
    Point best{};
    double best_gap = -1.0;
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const Point p = SamplePosition(spec, rng);
      const double gap = MinDistance(p, placed);
      if (gap > best_gap) {
        best = p;
        best_gap = gap;
      }
      if (gap >= separation) break;
    }
    if (best_gap < separation) warning = true;
    placed.push_back(best);
  }

  Scene scene{DensityMap(spec.height, spec.width),
              PointAnnotationSet(spec.height, spec.width, placed),
              spec.head_sigma,
              std::vector<double>(placed.size(), 1.0),
              warning,
              {}};
  for (std::size_t i = 0; i < placed.size(); ++i) {
    AddBlob(scene.image, placed[i], spec.head_sigma, scene.amplitudes[i]);
  }
  return scene;
}

Scene ApplyNoise(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed) {
  if (noise.zero_mean_std < 0.0 || noise.size_jitter < 0.0 ||
      noise.occlusion_rate < 0.0 || noise.occlusion_rate > 1.0) {
    ThrowUsage("noise parameters must be non-negative with occlusion rate <= 1");
  }
  Scene out = scene;
  if (noise.IsZero()) return out;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto points = scene.annotations.points();
  const std::size_t n = points.size();

  std::vector<double> radii(n, scene.head_sigma);
  if (noise.size_jitter > 0.0) {
    out.image = DensityMap(scene.image.height(), scene.image.width());
    for (std::size_t i = 0; i < n; ++i) {
      const double jitter = 1.0 + noise.size_jitter * (2.0 * unit(rng) - 1.0);
      radii[i] = std::max(0.25, scene.head_sigma * jitter);
      AddBlob(out.image, points[i], radii[i], scene.amplitudes[i]);
    }
  }

  if (noise.occlusion_rate > 0.0 && n >= 2) {
    for (std::size_t i = 0; i < n; ++i) {
      if (unit(rng) >= noise.occlusion_rate) continue;
      std::size_t nearest = i;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = std::hypot(points[j].row - points[i].row,
                                    points[j].col - points[i].col);
        if (d < best) {
          best = d;
          nearest = j;
        }
      }
      // Neighbour's plateau covers the half of head i that faces it.
      double ur = points[nearest].row - points[i].row;
      double uc = points[nearest].col - points[i].col;
      const double len = std::hypot(ur, uc);
      if (len > 0.0) {
        ur /= len;
        uc /= len;
      } else {
        ur = 0.0;
        uc = 1.0;
      }
      const double radius = radii[i];
      const Point center{points[i].row + 0.5 * radius * ur, points[i].col + 0.5 * radius * uc};
      const double level = scene.amplitudes[nearest];
      const int r0 = std::max(0, static_cast<int>(std::ceil(center.row - radius)));
      const int r1 = std::min(out.image.height() - 1, static_cast<int>(std::floor(center.row + radius)));
      const int c0 = std::max(0, static_cast<int>(std::ceil(center.col - radius)));
      const int c1 = std::min(out.image.width() - 1, static_cast<int>(std::floor(center.col + radius)));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          if (std::hypot(r - center.row, c - center.col) <= radius) out.image(r, c) = level;
        }
      }
      out.overdraws.push_back({static_cast<int>(i), static_cast<int>(nearest), center, radius});
    }
  }

  if (noise.zero_mean_std > 0.0) {
    std::normal_distribution<double> normal(0.0, noise.zero_mean_std);
    for (double& v : out.image.values()) v += normal(rng);
  }
  return out;
}

Sample MakeSample(const Scene& scene, double gt_sigma, int output_stride) {
  return Sample{Image::FromMap(scene.image),
                RenderGroundTruth(scene.annotations, gt_sigma, output_stride),
                static_cast<double>(scene.annotations.count())};
}

std::vector<SuiteScene> PlanSuite(const SuiteSpec& spec) {
  if (spec.min_heads < 0 || spec.max_heads < spec.min_heads) {
    ThrowUsage("invalid head-count range");
  }
  if (spec.n_train < 1 || spec.n_val < 0) ThrowUsage("suite needs at least one training image");
  std::vector<SuiteScene> plan;
  const int total = spec.n_train + spec.n_val;
  std::mt19937_64 rng(DeriveSeed(spec.seed, 1, 0));
  std::uniform_int_distribution<int> heads(spec.min_heads, spec.max_heads);
  for (int i = 0; i < total; ++i) {
    SuiteScene s;
    s.spec.height = spec.height;
    s.spec.width = spec.width;
    s.spec.n_heads = heads(rng);
    s.spec.gradient = spec.gradient;
    s.spec.head_sigma = spec.head_sigma;
    s.spec.seed = DeriveSeed(spec.seed, 2, static_cast<std::uint64_t>(i));
    s.noise_seed = DeriveSeed(spec.seed, 3, static_cast<std::uint64_t>(i));
    s.train = i < spec.n_train;
    plan.push_back(s);
  }
  return plan;
}

Scene RealizeSuiteScene(const SuiteScene& planned, const NoiseSpec& noise) {
  Scene scene = GenerateScene(planned.spec);
  if (!noise.IsZero()) scene = ApplyNoise(scene, noise, planned.noise_seed);
  return scene;
}

Dataset MakeSyntheticSuite(const SuiteSpec& spec) {
  Dataset data;
  for (const SuiteScene& planned : PlanSuite(spec)) {
    Sample sample =
        MakeSample(RealizeSuiteScene(planned, spec.noise), spec.gt_sigma, spec.output_stride);
    (planned.train ? data.train : data.val).push_back(std::move(sample));
  }
  return data;
}

}  // namespace spanet
