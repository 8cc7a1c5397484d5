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

#include "spanet/spanet.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <optional>
#include <string>

#include "spanet/density_map.hpp"
#include "spanet/driver.hpp"
#include "spanet/error.hpp"
#include "spanet/io.hpp"
#include "spanet/mesa.hpp"
#include "spanet/metrics.hpp"
#include "spanet/model.hpp"
#include "spanet/subregion.hpp"
#include "spanet/trainer.hpp"

struct spanet_density {
  spanet::DensityMap map;
};

struct spanet_model {
  spanet::ConvDensityModel model;
};

namespace {

thread_local std::string g_last_error;

spanet_status Fail(spanet_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
spanet_status Guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return SPANET_OK;
  } catch (const spanet::Error& e) {
    return Fail(static_cast<spanet_status>(static_cast<int>(e.kind())), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(SPANET_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return Fail(SPANET_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return Fail(SPANET_ERR_INTERNAL, e.what());
  } catch (...) {
    return Fail(SPANET_ERR_INTERNAL, "unknown failure");
  }
}

void Require(const void* p, const char* name) {
  if (p == nullptr) spanet::ThrowUsage(std::string(name) + " must not be null");
}

char* Duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void Emit(char** out, const std::string& s) {
  if (out != nullptr) *out = Duplicate(s);
}

spanet_density* Wrap(spanet::DensityMap map) {
  return new spanet_density{std::move(map)};
}

bool HasExtension(const std::filesystem::path& p, const char* ext) {
  return p.extension() == ext;
}

}  // namespace

extern "C" {

const char* spanet_version(void) { return "1.0.0"; }

const char* spanet_last_error(void) { return g_last_error.c_str(); }

void spanet_string_free(char* s) { std::free(s); }

spanet_status spanet_density_create(int height, int width, const double* values,
                                    spanet_density** out) {
  return Guard([&] {
    Require(out, "out");
    if (height < 1 || width < 1) spanet::ThrowUsage("map dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(height) * width;
    *out = values == nullptr
               ? Wrap(spanet::DensityMap(height, width))
               : Wrap(spanet::DensityMap(height, width, std::vector<double>(values, values + n)));
  });
}

void spanet_density_destroy(spanet_density* map) { delete map; }

int spanet_density_height(const spanet_density* map) {
  return map == nullptr ? 0 : map->map.height();
}

int spanet_density_width(const spanet_density* map) {
  return map == nullptr ? 0 : map->map.width();
}

spanet_status spanet_density_values(const spanet_density* map, double* out, size_t capacity) {
  return Guard([&] {
    Require(map, "map");
    Require(out, "out");
    const auto v = map->map.values();
    const std::size_t n = std::min(capacity, v.size());
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), out);
  });
}

double spanet_density_total(const spanet_density* map) {
  return map == nullptr ? 0.0 : spanet::TotalCount(map->map);
}

spanet_status spanet_density_resize(const spanet_density* map, int height, int width,
                                    spanet_density** out) {
  return Guard([&] {
    Require(map, "map");
    Require(out, "out");
    *out = Wrap(spanet::ResizeBilinear(map->map, height, width));
  });
}

spanet_status spanet_density_read(const char* path, spanet_density** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    const std::filesystem::path p(path);
    if (HasExtension(p, ".pgm")) {
      *out = Wrap(spanet::ReadDensityPgm(p));
    } else if (HasExtension(p, ".csv")) {
      *out = Wrap(spanet::ReadDensityCsv(p));
    } else {
      spanet::ThrowUsage("unsupported map format: " + p.string());
    }
  });
}

spanet_status spanet_density_write(const spanet_density* map, const char* path) {
  return Guard([&] {
    Require(map, "map");
    Require(path, "path");
    const std::filesystem::path p(path);
    if (HasExtension(p, ".pgm")) {
      spanet::WriteDensityPgm(p, map->map);
    } else if (HasExtension(p, ".csv")) {
      spanet::WriteDensityCsv(p, map->map);
    } else {
      spanet::ThrowUsage("unsupported map format: " + p.string());
    }
  });
}

spanet_status spanet_render_annotations(const char* annotation_csv, int image_height,
                                        int image_width, double sigma, int output_stride,
                                        spanet_density** out) {
  return Guard([&] {
    Require(annotation_csv, "annotation_csv");
    Require(out, "out");
    const auto ann = spanet::ReadAnnotationsCsv(annotation_csv, image_height, image_width);
    *out = Wrap(spanet::RenderGroundTruth(ann, sigma, output_stride));
  });
}

spanet_status spanet_render_points(const double* rows, const double* cols, size_t count,
                                   int image_height, int image_width, double sigma,
                                   int output_stride, spanet_density** out) {
  return Guard([&] {
    Require(out, "out");
    if (count > 0) {
      Require(rows, "rows");
      Require(cols, "cols");
    }
    spanet::PointAnnotationSet ann(image_height, image_width);
    for (std::size_t i = 0; i < count; ++i) ann.Add({rows[i], cols[i]});
    *out = Wrap(spanet::RenderGroundTruth(ann, sigma, output_stride));
  });
}

spanet_status spanet_mesa_exact(const spanet_density* pred, const spanet_density* gt,
                                double* value, spanet_rect* region) {
  return Guard([&] {
    Require(pred, "pred");
    Require(gt, "gt");
    const spanet::MesaResult r = spanet::MesaExcessExact(pred->map, gt->map);
    if (value != nullptr) *value = r.value;
    if (region != nullptr) {
      *region = {r.region.top, r.region.left, r.region.bottom, r.region.right};
    }
  });
}

spanet_status spanet_mesa_bruteforce(const spanet_density* pred, const spanet_density* gt,
                                     double* value) {
  return Guard([&] {
    Require(pred, "pred");
    Require(gt, "gt");
    Require(value, "value");
    *value = spanet::MesaExcessBruteforce(pred->map, gt->map);
  });
}

spanet_status spanet_count_errors(const double* estimated, const double* truth, size_t count,
                                  double* mae, double* mse) {
  return Guard([&] {
    Require(estimated, "estimated");
    Require(truth, "truth");
    const spanet::CountErrors e = spanet::MaeMse(std::span<const double>(estimated, count),
                                                 std::span<const double>(truth, count));
    if (mae != nullptr) *mae = e.mae;
    if (mse != nullptr) *mse = e.mse;
  });
}

spanet_status spanet_psnr(const spanet_density* a, const spanet_density* b, double* db) {
  return Guard([&] {
    Require(a, "a");
    Require(b, "b");
    Require(db, "db");
    *db = spanet::Psnr(a->map, b->map);
  });
}

spanet_status spanet_ssim(const spanet_density* a, const spanet_density* b, double* ssim) {
  return Guard([&] {
    Require(a, "a");
    Require(b, "b");
    Require(ssim, "ssim");
    *ssim = spanet::Ssim(a->map, b->map);
  });
}

spanet_status spanet_evaluate_directories(const char* pred_dir, const char* gt_dir,
                                          char** report_json) {
  return Guard([&] {
    Require(pred_dir, "pred_dir");
    Require(gt_dir, "gt_dir");
    Emit(report_json, spanet::EvaluateDirectories(pred_dir, gt_dir));
  });
}

spanet_status spanet_model_create_default(int output_stride, double init_std, uint64_t seed,
                                          spanet_model** out) {
  return Guard([&] {
    Require(out, "out");
    if (output_stride < 1) spanet::ThrowUsage("output stride must be positive");
    auto model = spanet::ConvDensityModel::DeskDefault(output_stride);
    model.InitializeGaussian(0.0, init_std, seed);
    *out = new spanet_model{std::move(model)};
  });
}

spanet_status spanet_model_load(const char* checkpoint, spanet_model** out) {
  return Guard([&] {
    Require(checkpoint, "checkpoint");
    Require(out, "out");
    *out = new spanet_model{spanet::ConvDensityModel::LoadCheckpoint(checkpoint)};
  });
}

spanet_status spanet_model_save(const spanet_model* model, const char* checkpoint) {
  return Guard([&] {
    Require(model, "model");
    Require(checkpoint, "checkpoint");
    model->model.SaveCheckpoint(checkpoint);
  });
}

void spanet_model_destroy(spanet_model* model) { delete model; }

size_t spanet_model_parameter_count(const spanet_model* model) {
  return model == nullptr ? 0 : model->model.parameter_count();
}

spanet_status spanet_model_forward(const spanet_model* model, const spanet_density* image,
                                   spanet_density** out) {
  return Guard([&] {
    Require(model, "model");
    Require(image, "image");
    Require(out, "out");
    *out = Wrap(model->model.Forward(spanet::Image::FromMap(image->map)));
  });
}

spanet_status spanet_model_subregion(const spanet_model* model, const spanet_density* image,
                                     const spanet_density* gt, const char* config_json,
                                     spanet_density** mask_out) {
  return Guard([&] {
    Require(model, "model");
    Require(image, "image");
    Require(mask_out, "mask_out");
    const spanet::TrainConfig cfg =
        spanet::TrainConfigFromJson(config_json != nullptr ? config_json : "{}");
    spanet::ConvDensityModel scratch = model->model;
    spanet::Optimizer optimizer(cfg.optimizer);
    const spanet::Image input = spanet::Image::FromMap(image->map);
    const int h = scratch.OutputHeight(input.height());
    const int w = scratch.OutputWidth(input.width());
    const spanet::BranchSchedule schedule = spanet::BuildBranchSchedule(
        h, w, spanet::ResolveBranches(cfg, h, w), cfg.anchor);
    spanet::RankConfig rank;
    rank.xi_mode = cfg.xi_mode;
    rank.xi = cfg.xi;
    rank.lr = cfg.lr;
    rank.weight = cfg.weights.ranking;
    rank.same_map_pooling = cfg.same_map_pooling;
    const spanet::SubregionResult r = spanet::GenerateSubregion(
        scratch, optimizer, input, schedule, rank, cfg.threshold, gt ? &gt->map : nullptr);
    const auto v = r.fused.values();
    *mask_out = Wrap(spanet::DensityMap(h, w, std::vector<double>(v.begin(), v.end())));
  });
}

spanet_status spanet_mask_write(const spanet_density* mask, const char* pgm_path,
                                const char* csv_path) {
  return Guard([&] {
    Require(mask, "mask");
    const auto v = mask->map.values();
    const spanet::DiscrepancyMask m(mask->map.height(), mask->map.width(),
                                    std::vector<double>(v.begin(), v.end()));
    if (pgm_path != nullptr) spanet::WriteMaskPgm(pgm_path, m);
    if (csv_path != nullptr) spanet::WriteMaskCsv(csv_path, m);
  });
}

spanet_status spanet_generate_dataset(const char* config_json, const char* out_dir,
                                      char** manifest_json) {
  return Guard([&] {
    Require(config_json, "config_json");
    Require(out_dir, "out_dir");
    Emit(manifest_json, spanet::RunGenerate(config_json, out_dir));
  });
}

spanet_status spanet_train(const char* config_json, const char* data_dir, const char* out_dir,
                           char** report_json) {
  return Guard([&] {
    Require(config_json, "config_json");
    Require(out_dir, "out_dir");
    std::optional<std::filesystem::path> data;
    if (data_dir != nullptr && *data_dir != '\0') data = data_dir;
    Emit(report_json, spanet::RunTraining(config_json, data, out_dir));
  });
}

spanet_status spanet_default_config(const char* command, char** config_json) {
  return Guard([&] {
    Require(command, "command");
    Require(config_json, "config_json");
    *config_json = Duplicate(spanet::DefaultConfig(command));
  });
}

spanet_status spanet_ablate(const char* config_json, const char* out_dir, char** table_json) {
  return Guard([&] {
    Require(config_json, "config_json");
    Require(out_dir, "out_dir");
    Emit(table_json,
         spanet::RunAblationToDirectory(spanet::AblationSpecFromJson(config_json), out_dir));
  });
}

}  // extern "C"
