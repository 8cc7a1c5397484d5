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

/*
 * C interface to the spanet library.
 *
 * All objects are opaque handles created and destroyed by the library.
 * Every fallible call returns a spanet_status; on failure a description is
 * available from spanet_last_error() on the calling thread until the next
 * call. Strings returned through char** out-parameters are owned by the
 * caller and released with spanet_string_free().
 */
#ifndef SPANET_SPANET_H_
#define SPANET_SPANET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SPANET_BUILDING_LIBRARY)
#define SPANET_API __attribute__((visibility("default")))
#else
#define SPANET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum spanet_status {
  SPANET_OK = 0,
  SPANET_ERR_USAGE = 2,
  SPANET_ERR_IO = 3,
  SPANET_ERR_DATA = 4,
  SPANET_ERR_INTERNAL = 5
} spanet_status;

typedef struct spanet_density spanet_density;
typedef struct spanet_model spanet_model;

typedef struct spanet_rect {
  int top;
  int left;
  int bottom;
  int right;
} spanet_rect;

SPANET_API const char* spanet_version(void);
SPANET_API const char* spanet_last_error(void);
SPANET_API void spanet_string_free(char* s);

/* ---- density maps ---------------------------------------------------- */

/* `values` holds height*width row-major entries; NULL gives a zero map. */
SPANET_API spanet_status spanet_density_create(int height, int width, const double* values,
                                               spanet_density** out);
SPANET_API void spanet_density_destroy(spanet_density* map);
SPANET_API int spanet_density_height(const spanet_density* map);
SPANET_API int spanet_density_width(const spanet_density* map);
/* Copies min(capacity, height*width) values into `out`. */
SPANET_API spanet_status spanet_density_values(const spanet_density* map, double* out,
                                               size_t capacity);
SPANET_API double spanet_density_total(const spanet_density* map);
SPANET_API spanet_status spanet_density_resize(const spanet_density* map, int height,
                                               int width, spanet_density** out);

/* Format chosen by extension: ".csv" exact dump, ".pgm" scaled P2. */
SPANET_API spanet_status spanet_density_read(const char* path, spanet_density** out);
SPANET_API spanet_status spanet_density_write(const spanet_density* map, const char* path);

/* Ground truth from an annotation CSV ("row,col" header). */
SPANET_API spanet_status spanet_render_annotations(const char* annotation_csv,
                                                   int image_height, int image_width,
                                                   double sigma, int output_stride,
                                                   spanet_density** out);
SPANET_API spanet_status spanet_render_points(const double* rows, const double* cols,
                                              size_t count, int image_height,
                                              int image_width, double sigma,
                                              int output_stride, spanet_density** out);

/* ---- MESA -------------------------------------------------------------- */

SPANET_API spanet_status spanet_mesa_exact(const spanet_density* pred,
                                           const spanet_density* gt, double* value,
                                           spanet_rect* region);
SPANET_API spanet_status spanet_mesa_bruteforce(const spanet_density* pred,
                                                const spanet_density* gt, double* value);

/* ---- metrics ----------------------------------------------------------- */

SPANET_API spanet_status spanet_count_errors(const double* estimated, const double* truth,
                                             size_t count, double* mae, double* mse);
SPANET_API spanet_status spanet_psnr(const spanet_density* a, const spanet_density* b,
                                     double* db);
SPANET_API spanet_status spanet_ssim(const spanet_density* a, const spanet_density* b,
                                     double* ssim);
/* Pairs same-named maps in two directories; writes a JSON metric report. */
SPANET_API spanet_status spanet_evaluate_directories(const char* pred_dir,
                                                     const char* gt_dir,
                                                     char** report_json);

/* ---- model ------------------------------------------------------------- */

SPANET_API spanet_status spanet_model_create_default(int output_stride, double init_std,
                                                     uint64_t seed, spanet_model** out);
SPANET_API spanet_status spanet_model_load(const char* checkpoint, spanet_model** out);
SPANET_API spanet_status spanet_model_save(const spanet_model* model, const char* checkpoint);
SPANET_API void spanet_model_destroy(spanet_model* model);
SPANET_API size_t spanet_model_parameter_count(const spanet_model* model);
/* Single-channel image in, density map out. */
SPANET_API spanet_status spanet_model_forward(const spanet_model* model,
                                              const spanet_density* image,
                                              spanet_density** out);
/* Runs the multi-branch discrepancy search on a copy of the model and
 * returns the fused soft mask. `gt` may be NULL unless the config asks for
 * the ground-truth margin. `config_json` uses the training-config keys. */
SPANET_API spanet_status spanet_model_subregion(const spanet_model* model,
                                                const spanet_density* image,
                                                const spanet_density* gt,
                                                const char* config_json,
                                                spanet_density** mask_out);
/* Hard PGM (0/255) and soft CSV of a mask; either path may be NULL. */
SPANET_API spanet_status spanet_mask_write(const spanet_density* mask, const char* pgm_path,
                                           const char* csv_path);

/* ---- experiment drivers (JSON in, JSON out) ---------------------------- */

/* Synthetic scenes: image PGM, annotation CSV and spec JSON per scene, plus
 * manifest.json. */
SPANET_API spanet_status spanet_generate_dataset(const char* config_json,
                                                 const char* out_dir,
                                                 char** manifest_json);
/* Trains on `data_dir` (a generated dataset) or, when NULL, on a synthetic
 * suite described by the config. Writes report.json, curves.csv,
 * steps.jsonl and checkpoint.json into out_dir. */
SPANET_API spanet_status spanet_train(const char* config_json, const char* data_dir,
                                      const char* out_dir, char** report_json);
/* Default config document of a CLI command ("gen", "train", "eval",
 * "mesa-check", "export", "ablate"). */
SPANET_API spanet_status spanet_default_config(const char* command, char** config_json);

/* Writes ablation.json and ablation.csv into out_dir. */
SPANET_API spanet_status spanet_ablate(const char* config_json, const char* out_dir,
                                       char** table_json);

#ifdef __cplusplus
}
#endif

#endif /* SPANET_SPANET_H_ */
