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
#include <string>
#include <vector>

#include "spanet/density_map.hpp"
#include "spanet/model.hpp"

namespace spanet {

enum class DensityGradient { kUniform, kLeftDense, kRadial };

std::string DensityGradientName(DensityGradient g);
DensityGradient ParseDensityGradient(const std::string& name);

struct SceneSpec {
  int height = 64;
  int width = 64;
  int n_heads = 0;
  DensityGradient gradient = DensityGradient::kUniform;
  double head_sigma = 1.5;  // blob radius in pixels
  std::uint64_t seed = 0;
};

struct NoiseSpec {
  double zero_mean_std = 0.0;
  double size_jitter = 0.0;     // multiplicative jitter fraction on blob radius
  double occlusion_rate = 0.0;  // probability a head is half-overdrawn

  bool IsZero() const {
    return zero_mean_std == 0.0 && size_jitter == 0.0 && occlusion_rate == 0.0;
  }
};

/// Disc overdrawn onto head `occluded` by its nearest neighbour `occluder`.
struct Overdraw {
  int occluded;
  int occluder;
  Point center;
  double radius;
};

struct Scene {
  DensityMap image;
  PointAnnotationSet annotations;
  double head_sigma;
  std::vector<double> amplitudes;
  // Set when the minimum-separation constraint could not be met for every
  // head; placement then falls back to the best candidate found.
  bool separation_warning = false;
  std::vector<Overdraw> overdraws;
};

Scene GenerateScene(const SceneSpec& spec);

// Annotations are never modified. An all-zero NoiseSpec returns the image
// unchanged bit for bit.
Scene ApplyNoise(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed);

struct Sample {
  Image image;
  DensityMap gt;
  double count;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

/// Desk-scale synthetic suite: scenes with a uniformly drawn head count.
struct SuiteSpec {
  int height = 64;
  int width = 64;
  int min_heads = 10;
  int max_heads = 60;
  int n_train = 200;
  int n_val = 50;
  DensityGradient gradient = DensityGradient::kUniform;
  double head_sigma = 1.5;
  double gt_sigma = 2.0;
  int output_stride = 1;
  NoiseSpec noise;
  std::uint64_t seed = 0;
};

Sample MakeSample(const Scene& scene, double gt_sigma, int output_stride);
Dataset MakeSyntheticSuite(const SuiteSpec& spec);

// Per-scene plan of a suite, in order: training scenes first.
struct SuiteScene {
  SceneSpec spec;
  std::uint64_t noise_seed = 0;
  bool train = true;
};
std::vector<SuiteScene> PlanSuite(const SuiteSpec& spec);
Scene RealizeSuiteScene(const SuiteScene& planned, const NoiseSpec& noise);

}  // namespace spanet
