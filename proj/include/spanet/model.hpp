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
#include <filesystem>
#include <span>
#include <vector>

#include "spanet/density_map.hpp"

namespace spanet {

/// Multi-channel input image, channel-major then row-major.
class Image {
 public:
  Image(int channels, int height, int width, double fill = 0.0);
  Image(int channels, int height, int width, std::vector<double> values);
  static Image FromMap(const DensityMap& map);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }

  double& operator()(int ch, int row, int col) {
    return values_[(static_cast<std::size_t>(ch) * height_ + row) * width_ + col];
  }
  double operator()(int ch, int row, int col) const {
    return values_[(static_cast<std::size_t>(ch) * height_ + row) * width_ + col];
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int channels_;
  int height_;
  int width_;
  std::vector<double> values_;
};

enum class Activation { kRelu, kIdentity };

struct LayerSpec {
  int in_channels;
  int out_channels;
  int kernel_size;  // odd; same-padding with zero fill
  Activation activation;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Flat parameter gradient, laid out like ConvDensityModel::parameters().
struct GradientBuffer {
  std::vector<double> values;

  void Zero() { std::fill(values.begin(), values.end(), 0.0); }
  // this += scale * other
  void Accumulate(const GradientBuffer& other, double scale = 1.0);
};

class ConvDensityModel;

/// Activations cached by a forward pass, consumed by Backward().
class ForwardPass {
 public:
  const DensityMap& output() const { return output_; }

 private:
  friend class ConvDensityModel;
  ForwardPass(DensityMap output) : output_(std::move(output)) {}

  DensityMap output_;
  const ConvDensityModel* owner_ = nullptr;
  std::uint64_t version_ = 0;
  // layer_inputs_[l] is the input to layer l (post-activation of l-1);
  // layer_outputs_.back() is the pre-pooling density.
  std::vector<std::vector<double>> layer_inputs_;
  std::vector<std::vector<double>> layer_outputs_;
  int height_ = 0;
  int width_ = 0;
};

/// Small fully convolutional density regressor with hand-written
/// backpropagation. Parameters live in one flat vector: for each layer the
/// out x in x k x k kernel followed by the out-channel biases.
class ConvDensityModel {
 public:
  ConvDensityModel(std::vector<LayerSpec> layers, int output_stride = 1);

  // 1 -> 8 -> 8 -> 1 channels, 3x3 kernels, relu/relu/identity.
  static ConvDensityModel DeskDefault(int output_stride = 1);

  void InitializeGaussian(double mean, double stddev, std::uint64_t seed);

  std::span<const LayerSpec> layers() const { return layers_; }
  int input_channels() const { return layers_.front().in_channels; }
  int output_stride() const { return output_stride_; }
  std::size_t parameter_count() const { return parameters_.size(); }
  std::span<const double> parameters() const { return parameters_; }
  void SetParameters(std::span<const double> values);
  // Offset of layer l's kernel block; its biases follow the kernel.
  std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }

  // Bumped on every parameter mutation; forward caches record it.
  std::uint64_t version() const { return version_; }

  GradientBuffer MakeGradientBuffer() const;

  DensityMap Forward(const Image& image) const;
  ForwardPass ForwardCached(const Image& image) const;

  // Gradient of <upstream, Forward(image)> with respect to the parameters.
  // Throws when the cache was produced by another model or a stale version.
  GradientBuffer Backward(const ForwardPass& pass,
                          const DensityMap& upstream) const;
  void BackwardAccumulate(const ForwardPass& pass, const DensityMap& upstream,
                          GradientBuffer& grads) const;

  int OutputHeight(int input_height) const;
  int OutputWidth(int input_width) const;

  // Versioned JSON checkpoint holding the topology and the flat parameters.
  void SaveCheckpoint(const std::filesystem::path& path) const;
  static ConvDensityModel LoadCheckpoint(const std::filesystem::path& path);

  friend bool operator==(const ConvDensityModel& a, const ConvDensityModel& b) {
    return a.layers_ == b.layers_ && a.output_stride_ == b.output_stride_ &&
           a.parameters_ == b.parameters_;
  }

 private:
  friend class Optimizer;
  std::span<double> mutable_parameters() {
    ++version_;
    return parameters_;
  }

  ForwardPass Run(const Image& image, bool keep_cache) const;

  std::vector<LayerSpec> layers_;
  int output_stride_;
  std::vector<std::size_t> offsets_;
  std::vector<double> parameters_;
  std::uint64_t version_ = 0;
};

enum class OptimizerKind { kSgd, kAdam };

/// Plain SGD or Adam over the flat parameter vector.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::kSgd,
                     double beta1 = 0.9, double beta2 = 0.999,
                     double epsilon = 1e-8);

  OptimizerKind kind() const { return kind_; }
  std::uint64_t steps() const { return steps_; }

  void Apply(ConvDensityModel& model, const GradientBuffer& grads, double lr);

 private:
  OptimizerKind kind_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::uint64_t steps_ = 0;
  std::vector<double> first_moment_;
  std::vector<double> second_moment_;
};

}  // namespace spanet
