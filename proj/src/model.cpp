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

#include "spanet/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"

#include "spanet/error.hpp"

namespace spanet {

namespace {

constexpr int kCheckpointVersion = 1;

std::size_t LayerParameterCount(const LayerSpec& l) {
  return static_cast<std::size_t>(l.out_channels) * l.in_channels *
             l.kernel_size * l.kernel_size +
         l.out_channels;
}

constexpr int kLanes = 4;
typedef double Lanes __attribute__((vector_size(kLanes * sizeof(double))));

inline Lanes LoadLanes(const double* p) {
  Lanes v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

inline void StoreLanes(double* p, Lanes v) { __builtin_memcpy(p, &v, sizeof v); }

// Copies `channels` planes into a zero border of width `pad`.
std::vector<double> PadPlanes(const double* src, int channels, int height, int width, int pad) {
  const int hp = height + 2 * pad;
  const int wp = width + 2 * pad;
  std::vector<double> out(static_cast<std::size_t>(channels) * hp * wp, 0.0);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < height; ++y) {
      const double* row = src + (static_cast<std::size_t>(c) * height + y) * width;
      std::copy(row, row + width,
                out.data() + (static_cast<std::size_t>(c) * hp + y + pad) * wp + pad);
    }
  }
  return out;
}

// out[o][y][x] = bias[o] + sum_{i,ky,kx} w[(i*k+ky)*k+kx][o] * in[i][y+ky][x+kx]
// over a padded input. `w` is tap-major with `oc` entries per tap; this call
// fills output channels o0 .. o0+OB-1.
template <int OB>
void CorrelateBlock(const double* w, int oc, int o0, const double* bias, const double* padded,
                    int cin, int k, int height, int width, double* out) {
  const int wp = width + k - 1;
  const std::size_t pplane = static_cast<std::size_t>(height + k - 1) * wp;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int y = 0; y < height; ++y) {
    int x = 0;
    for (; x + kLanes <= width; x += kLanes) {
      Lanes acc[OB];
      for (int o = 0; o < OB; ++o) {
        const double b = bias ? bias[o0 + o] : 0.0;
        acc[o] = Lanes{b, b, b, b};
      }
      for (int i = 0; i < cin; ++i) {
        for (int ky = 0; ky < k; ++ky) {
          const double* row = padded + i * pplane + static_cast<std::size_t>(y + ky) * wp + x;
          const double* tap = w + static_cast<std::size_t>((i * k + ky) * k) * oc + o0;
          for (int kx = 0; kx < k; ++kx, tap += oc) {
            const Lanes src = LoadLanes(row + kx);
            for (int o = 0; o < OB; ++o) acc[o] += tap[o] * src;
          }
        }
      }
      for (int o = 0; o < OB; ++o) {
        StoreLanes(out + (o0 + o) * plane + static_cast<std::size_t>(y) * width + x, acc[o]);
      }
    }
    for (; x < width; ++x) {
      for (int o = 0; o < OB; ++o) {
        double acc = bias ? bias[o0 + o] : 0.0;
        for (int i = 0; i < cin; ++i) {
          for (int ky = 0; ky < k; ++ky) {
            const double* row = padded + i * pplane + static_cast<std::size_t>(y + ky) * wp + x;
            for (int kx = 0; kx < k; ++kx) {
              acc += w[static_cast<std::size_t>((i * k + ky) * k + kx) * oc + o0 + o] * row[kx];
            }
          }
        }
        out[(o0 + o) * plane + static_cast<std::size_t>(y) * width + x] = acc;
      }
    }
  }
}

void Correlate(const double* w, int oc, const double* bias, const double* padded, int cin, int k,
               int height, int width, double* out) {
  int o = 0;
  for (; o + 8 <= oc; o += 8) CorrelateBlock<8>(w, oc, o, bias, padded, cin, k, height, width, out);
  for (; o + 4 <= oc; o += 4) CorrelateBlock<4>(w, oc, o, bias, padded, cin, k, height, width, out);
  for (; o < oc; ++o) CorrelateBlock<1>(w, oc, o, bias, padded, cin, k, height, width, out);
}

// g[tap][o] += sum_{y,x} grad[o][y][x] * in[i][y+ky][x+kx] for channels
// o0 .. o0+OB-1, tap = (i*k+ky)*k+kx, over a padded input.
template <int OB>
void KernelGradBlock(const double* grad, int oc, int o0, const double* padded, int cin, int k,
                     int height, int width, double* g) {
  const int wp = width + k - 1;
  const std::size_t pplane = static_cast<std::size_t>(height + k - 1) * wp;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int i = 0; i < cin; ++i) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Lanes acc[OB] = {};
        double tail[OB] = {};
        for (int y = 0; y < height; ++y) {
          const double* src = padded + i * pplane + static_cast<std::size_t>(y + ky) * wp + kx;
          const double* gy = grad + o0 * plane + static_cast<std::size_t>(y) * width;
          int x = 0;
          for (; x + kLanes <= width; x += kLanes) {
            const Lanes v = LoadLanes(src + x);
            for (int o = 0; o < OB; ++o) acc[o] += LoadLanes(gy + o * plane + x) * v;
          }
          for (; x < width; ++x) {
            for (int o = 0; o < OB; ++o) tail[o] += gy[o * plane + x] * src[x];
          }
        }
        double* dst = g + static_cast<std::size_t>((i * k + ky) * k + kx) * oc + o0;
        for (int o = 0; o < OB; ++o) {
          double sum = tail[o];
          for (int t = 0; t < kLanes; ++t) sum += acc[o][t];
          dst[o] += sum;
        }
      }
    }
  }
}

// Transposes kernel o x i x k x k into tap-major (i,ky,kx) x o.
std::vector<double> TapMajor(const LayerSpec& l, const double* params) {
  const int k = l.kernel_size;
  const int taps = l.in_channels * k * k;
  std::vector<double> w(static_cast<std::size_t>(taps) * l.out_channels);
  for (int o = 0; o < l.out_channels; ++o) {
    for (int t = 0; t < taps; ++t) {
      w[static_cast<std::size_t>(t) * l.out_channels + o] =
          params[static_cast<std::size_t>(o) * taps + t];
    }
  }
  return w;
}

// out[o] = bias[o] + sum_i kernel[o][i] (*) in[i], zero padded "same".
void ConvolveSame(const LayerSpec& l, const double* params, const double* in,
                  double* out, int height, int width) {
  const int k = l.kernel_size;
  const double* bias = params + static_cast<std::size_t>(l.out_channels) * l.in_channels * k * k;
  const std::vector<double> padded = PadPlanes(in, l.in_channels, height, width, k / 2);
  const std::vector<double> w = TapMajor(l, params);
  Correlate(w.data(), l.out_channels, bias, padded.data(), l.in_channels, k, height, width, out);
}

// Given dL/d(pre-activation) for a layer, accumulate parameter gradients and
// (optionally) dL/d(input).
void ConvolveSameBackward(const LayerSpec& l, const double* params,
                          const double* in, const double* grad_out,
                          double* grad_params, double* grad_in, int height,
                          int width) {
  const int k = l.kernel_size;
  const int oc = l.out_channels;
  const int taps = l.in_channels * k * k;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  double* grad_bias = grad_params + static_cast<std::size_t>(oc) * taps;
  for (int o = 0; o < oc; ++o) {
    const double* g_plane = grad_out + o * plane;
    double bsum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) bsum += g_plane[p];
    grad_bias[o] += bsum;
  }

  const std::vector<double> padded = PadPlanes(in, l.in_channels, height, width, k / 2);
  std::vector<double> g_taps(static_cast<std::size_t>(taps) * oc, 0.0);
  int o = 0;
  for (; o + 8 <= oc; o += 8) {
    KernelGradBlock<8>(grad_out, oc, o, padded.data(), l.in_channels, k, height, width, g_taps.data());
  }
  for (; o < oc; ++o) {
    KernelGradBlock<1>(grad_out, oc, o, padded.data(), l.in_channels, k, height, width, g_taps.data());
  }
  for (int oo = 0; oo < oc; ++oo) {
    for (int t = 0; t < taps; ++t) {
      grad_params[static_cast<std::size_t>(oo) * taps + t] +=
          g_taps[static_cast<std::size_t>(t) * oc + oo];
    }
  }

  if (grad_in != nullptr) {
    // dL/d in[i] correlates the padded upstream with the flipped kernels,
    // with the roles of input and output channels swapped.
    const int ic = l.in_channels;
    std::vector<double> flipped(static_cast<std::size_t>(oc) * k * k * ic);
    for (int oo = 0; oo < oc; ++oo) {
      for (int i = 0; i < ic; ++i) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const double v =
                params[((static_cast<std::size_t>(oo) * ic + i) * k + (k - 1 - ky)) * k + (k - 1 - kx)];
            flipped[static_cast<std::size_t>((oo * k + ky) * k + kx) * ic + i] = v;
          }
        }
      }
    }
    const std::vector<double> gpad = PadPlanes(grad_out, oc, height, width, k / 2);
    std::vector<double> gin(static_cast<std::size_t>(ic) * plane);
    Correlate(flipped.data(), ic, nullptr, gpad.data(), oc, k, height, width, gin.data());
    for (std::size_t p = 0; p < gin.size(); ++p) grad_in[p] += gin[p];
  }
}

const char* ActivationName(Activation a) {
  return a == Activation::kRelu ? "relu" : "identity";
}

Activation ParseActivation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  ThrowData("unknown activation '" + name + "' in checkpoint");
}

}  // namespace

Image::Image(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    ThrowData("image dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Image::Image(int channels, int height, int width, std::vector<double> values)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
  if (channels < 1 || height < 1 || width < 1) {
    ThrowData("image dimensions must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(channels) * height * width) {
    ThrowData("image value count does not match its dimensions");
  }
}

Image Image::FromMap(const DensityMap& map) {
  return Image(1, map.height(), map.width(),
               std::vector<double>(map.values().begin(), map.values().end()));
}

void GradientBuffer::Accumulate(const GradientBuffer& other, double scale) {
  if (other.values.size() != values.size()) {
    ThrowData("gradient buffer size mismatch");
  }
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
}

ConvDensityModel::ConvDensityModel(std::vector<LayerSpec> layers, int output_stride)
    : layers_(std::move(layers)), output_stride_(output_stride) {
  if (layers_.empty()) ThrowUsage("model needs at least one layer");
  if (output_stride_ < 1) ThrowUsage("output stride must be >= 1");
  if (layers_.back().out_channels != 1) {
    ThrowUsage("final layer must produce a single density channel");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& spec = layers_[l];
    if (spec.in_channels < 1 || spec.out_channels < 1 || spec.kernel_size < 1 ||
        spec.kernel_size % 2 == 0) {
      ThrowUsage("layer " + std::to_string(l) + " has an invalid shape");
    }
    if (l > 0 && layers_[l - 1].out_channels != spec.in_channels) {
      ThrowUsage("layer " + std::to_string(l) + " input channels do not chain");
    }
    offsets_.push_back(offset);
    offset += LayerParameterCount(spec);
  }
  parameters_.assign(offset, 0.0);
}

ConvDensityModel ConvDensityModel::DeskDefault(int output_stride) {
  return ConvDensityModel({{1, 8, 3, Activation::kRelu},
                           {8, 8, 3, Activation::kRelu},
                           {8, 1, 3, Activation::kIdentity}},
                          output_stride);
}

void ConvDensityModel::InitializeGaussian(double mean, double stddev,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, stddev);
  for (double& p : parameters_) p = dist(rng);
  ++version_;
}

void ConvDensityModel::SetParameters(std::span<const double> values) {
  if (values.size() != parameters_.size()) {
    ThrowData("parameter vector has " + std::to_string(values.size()) +
              " entries, model expects " + std::to_string(parameters_.size()));
  }
  std::copy(values.begin(), values.end(), parameters_.begin());
  ++version_;
}

GradientBuffer ConvDensityModel::MakeGradientBuffer() const {
  return GradientBuffer{std::vector<double>(parameters_.size(), 0.0)};
}

int ConvDensityModel::OutputHeight(int input_height) const {
  return (input_height + output_stride_ - 1) / output_stride_;
}

int ConvDensityModel::OutputWidth(int input_width) const {
  return (input_width + output_stride_ - 1) / output_stride_;
}

DensityMap ConvDensityModel::Forward(const Image& image) const {
  return Run(image, false).output_;
}

ForwardPass ConvDensityModel::ForwardCached(const Image& image) const {
  return Run(image, true);
}

ForwardPass ConvDensityModel::Run(const Image& image, bool keep_cache) const {
  if (image.channels() != input_channels()) {
    ThrowData("image has " + std::to_string(image.channels()) +
              " channels, model expects " + std::to_string(input_channels()));
  }
  const int height = image.height();
  const int width = image.width();
  const std::size_t plane = static_cast<std::size_t>(height) * width;

  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;
  std::vector<double> current(image.values().begin(), image.values().end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& spec = layers_[l];
    std::vector<double> out(spec.out_channels * plane);
    ConvolveSame(spec, parameters_.data() + offsets_[l], current.data(), out.data(),
                 height, width);
    if (keep_cache) outputs.push_back(out);  // pre-activation
    if (spec.activation == Activation::kRelu) {
      for (double& v : out) v = v > 0.0 ? v : 0.0;
    }
    if (keep_cache) {
      inputs.push_back(std::move(current));
    }
    current = std::move(out);
  }

  DensityMap density(OutputHeight(height), OutputWidth(width));
  const int s = output_stride_;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      density(y / s, x / s) += current[static_cast<std::size_t>(y) * width + x];
    }
  }

  ForwardPass pass(std::move(density));
  if (keep_cache) {
    pass.owner_ = this;
    pass.version_ = version_;
    pass.layer_inputs_ = std::move(inputs);
    pass.layer_outputs_ = std::move(outputs);
    pass.height_ = height;
    pass.width_ = width;
  }
  return pass;
}

GradientBuffer ConvDensityModel::Backward(const ForwardPass& pass,
                                          const DensityMap& upstream) const {
  GradientBuffer grads = MakeGradientBuffer();
  BackwardAccumulate(pass, upstream, grads);
  return grads;
}

void ConvDensityModel::BackwardAccumulate(const ForwardPass& pass,
                                          const DensityMap& upstream,
                                          GradientBuffer& grads) const {
  if (pass.owner_ != this || pass.layer_inputs_.empty()) {
    ThrowData("backward requires a cached forward pass of this model");
  }
  if (pass.version_ != version_) {
    ThrowData("backward called with a stale forward cache");
  }
  RequireSameShape(upstream, pass.output_, "backward upstream");
  if (grads.values.size() != parameters_.size()) {
    ThrowData("gradient buffer size mismatch");
  }
  const int height = pass.height_;
  const int width = pass.width_;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const int s = output_stride_;

  // Sum pooling broadcasts the upstream gradient over each stride block.
  std::vector<double> grad(plane);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      grad[static_cast<std::size_t>(y) * width + x] = upstream(y / s, x / s);
    }
  }

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const LayerSpec& spec = layers_[li];
    if (spec.activation == Activation::kRelu) {
      const std::vector<double>& pre = pass.layer_outputs_[li];
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
      }
    }
    std::vector<double> grad_in;
    if (li > 0) grad_in.assign(spec.in_channels * plane, 0.0);
    ConvolveSameBackward(spec, parameters_.data() + offsets_[li],
                         pass.layer_inputs_[li].data(), grad.data(),
                         grads.values.data() + offsets_[li],
                         li > 0 ? grad_in.data() : nullptr, height, width);
    grad = std::move(grad_in);
  }
}

void ConvDensityModel::SaveCheckpoint(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "spanet-checkpoint";
  j["version"] = kCheckpointVersion;
  j["output_stride"] = output_stride_;
  j["layers"] = nlohmann::json::array();
  for (const LayerSpec& l : layers_) {
    j["layers"].push_back({{"in_channels", l.in_channels},
                           {"out_channels", l.out_channels},
                           {"kernel_size", l.kernel_size},
                           {"activation", ActivationName(l.activation)}});
  }
  j["parameters"] = parameters_;
  std::ofstream out(path, std::ios::trunc);
  if (!out) ThrowIo("cannot write checkpoint " + path.string());
  out << j.dump(1) << "\n";
  if (!out) ThrowIo("failed writing checkpoint " + path.string());
}

ConvDensityModel ConvDensityModel::LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) ThrowIo("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format").get<std::string>() != "spanet-checkpoint") {
      ThrowData("not a spanet checkpoint: " + path.string());
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      ThrowData("unsupported checkpoint version in " + path.string());
    }
    std::vector<LayerSpec> layers;
    for (const auto& l : j.at("layers")) {
      layers.push_back({l.at("in_channels").get<int>(), l.at("out_channels").get<int>(),
                        l.at("kernel_size").get<int>(),
                        ParseActivation(l.at("activation").get<std::string>())});
    }
    ConvDensityModel model(std::move(layers), j.at("output_stride").get<int>());
    model.SetParameters(j.at("parameters").get<std::vector<double>>());
    return model;
  } catch (const nlohmann::json::exception& e) {
    ThrowData("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

Optimizer::Optimizer(OptimizerKind kind, double beta1, double beta2, double epsilon)
    : kind_(kind), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Optimizer::Apply(ConvDensityModel& model, const GradientBuffer& grads,
                      double lr) {
  if (grads.values.size() != model.parameter_count()) {
    ThrowData("gradient buffer does not match model parameters");
  }
  std::span<double> params = model.mutable_parameters();
  ++steps_;
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads.values[i];
    return;
  }
  if (first_moment_.size() != params.size()) {
    first_moment_.assign(params.size(), 0.0);
    second_moment_.assign(params.size(), 0.0);
  }
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(beta1_, t);
  const double correction2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads.values[i];
    first_moment_[i] = beta1_ * first_moment_[i] + (1.0 - beta1_) * g;
    second_moment_[i] = beta2_ * second_moment_[i] + (1.0 - beta2_) * g * g;
    const double m_hat = first_moment_[i] / correction1;
    const double v_hat = second_moment_[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
  }
}

}  // namespace spanet
