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

#include <filesystem>
#include <optional>
#include <string>

#include "spanet/ablation.hpp"
#include "spanet/synth.hpp"
#include "spanet/trainer.hpp"

namespace spanet {

// JSON forms of the experiment descriptions. Missing keys keep defaults.
std::string ToJson(const SuiteSpec& spec);
SuiteSpec SuiteSpecFromJson(const std::string& json);
std::string ToJson(const AblationSpec& spec);
AblationSpec AblationSpecFromJson(const std::string& json);

// Writes scene_NNNN.{pgm,csv,json} plus manifest.json; returns the manifest.
std::string GenerateDataset(const SuiteSpec& spec, const std::filesystem::path& dir);

// Config: {"suite": {...}}.
std::string RunGenerate(const std::string& config_json, const std::filesystem::path& dir);

// Reads a generated dataset back. Ground truth is rendered from the
// annotation files with the given sigma and stride.
Dataset LoadDataset(const std::filesystem::path& dir, double gt_sigma, int output_stride);

// Config: {"train": {...}, "suite": {...}}. Trains on `data_dir` when given,
// otherwise on the synthetic suite. Writes report.json, curves.csv,
// steps.jsonl and checkpoint.json; returns the report without step logs.
std::string RunTraining(const std::string& config_json,
                        const std::optional<std::filesystem::path>& data_dir,
                        const std::filesystem::path& out_dir);

// Pairs files by stem (".csv" or ".pgm") across the two directories.
// Predictions are resized to the ground-truth size for PSNR and SSIM.
std::string EvaluateDirectories(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& gt_dir);

// Runs the sweep with one subdirectory per (variant, seed) holding that
// run's report and curves; writes ablation.json and ablation.csv.
std::string RunAblationToDirectory(const AblationSpec& spec,
                                   const std::filesystem::path& out_dir);

// Default config documents per CLI command.
std::string DefaultConfig(const std::string& command);

// Reads a whole file; io error when unreadable.
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace spanet
