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

#include "spanet/driver.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "spanet/error.hpp"
#include "spanet/io.hpp"
#include "spanet/metrics.hpp"

namespace spanet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json Parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    ThrowData("malformed " + what + ": " + e.what());
  }
}

template <typename T>
void Take(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

json SuiteToJson(const SuiteSpec& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"min_heads", s.min_heads},
          {"max_heads", s.max_heads},
          {"n_train", s.n_train},
          {"n_val", s.n_val},
          {"gradient", DensityGradientName(s.gradient)},
          {"head_sigma", s.head_sigma},
          {"gt_sigma", s.gt_sigma},
          {"output_stride", s.output_stride},
          {"noise",
           {{"zero_mean_std", s.noise.zero_mean_std},
            {"size_jitter", s.noise.size_jitter},
            {"occlusion_rate", s.noise.occlusion_rate}}},
          {"seed", s.seed}};
}

SuiteSpec SuiteFromJson(const json& j) {
  SuiteSpec s;
  if (!j.is_object()) ThrowData("suite description must be an object");
  try {
    Take(j, "height", s.height);
    Take(j, "width", s.width);
    Take(j, "min_heads", s.min_heads);
    Take(j, "max_heads", s.max_heads);
    Take(j, "n_train", s.n_train);
    Take(j, "n_val", s.n_val);
    if (j.contains("gradient")) s.gradient = ParseDensityGradient(j["gradient"].get<std::string>());
    Take(j, "head_sigma", s.head_sigma);
    Take(j, "gt_sigma", s.gt_sigma);
    Take(j, "output_stride", s.output_stride);
    if (j.contains("noise")) {
      const json& n = j["noise"];
      Take(n, "zero_mean_std", s.noise.zero_mean_std);
      Take(n, "size_jitter", s.noise.size_jitter);
      Take(n, "occlusion_rate", s.noise.occlusion_rate);
    }
    Take(j, "seed", s.seed);
  } catch (const json::exception& e) {
    ThrowData(std::string("invalid suite description: ") + e.what());
  }
  if (s.height < 1 || s.width < 1) ThrowUsage("scene size must be positive");
  if (s.head_sigma <= 0.0 || s.gt_sigma <= 0.0) ThrowUsage("sigmas must be positive");
  if (s.output_stride < 1) ThrowUsage("output stride must be positive");
  if (s.noise.zero_mean_std < 0.0 || s.noise.size_jitter < 0.0 ||
      s.noise.occlusion_rate < 0.0 || s.noise.occlusion_rate > 1.0) {
    ThrowUsage("noise levels must be non-negative and the occlusion rate at most 1");
  }
  return s;
}

std::string SceneName(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", i);
  return buf;
}

bool IsMapFile(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".csv" || ext == ".pgm";
}

DensityMap ReadMapFile(const fs::path& p) {
  return p.extension() == ".pgm" ? ReadDensityPgm(p) : ReadDensityCsv(p);
}

std::map<std::string, fs::path> MapFilesByStem(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) ThrowIo("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !IsMapFile(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (out.count(stem)) ThrowData("two maps share the name '" + stem + "' in " + dir.string());
    out[stem] = entry.path();
  }
  return out;
}

}  // namespace

std::string ReadTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowIo("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) ThrowIo("cannot write " + path.string());
  out << text;
  if (!out) ThrowIo("write failed for " + path.string());
}

std::string ToJson(const SuiteSpec& spec) { return SuiteToJson(spec).dump(2); }

SuiteSpec SuiteSpecFromJson(const std::string& text) {
  return SuiteFromJson(Parse(text, "suite description"));
}

std::string ToJson(const AblationSpec& spec) {
  json j;
  j["axis"] = AblationAxisName(spec.axis);
  j["seeds"] = spec.seeds;
  j["suite"] = SuiteToJson(spec.suite);
  j["base"] = json::parse(ToJson(spec.base));
  j["branch_values"] = spec.branch_values;
  j["stride_values"] = spec.stride_values;
  j["random_weight_draws"] = spec.random_weight_draws;
  j["workers"] = spec.workers;
  return j.dump(2);
}

AblationSpec AblationSpecFromJson(const std::string& text) {
  const json j = Parse(text, "ablation config");
  AblationSpec spec;
  try {
    if (j.contains("axis")) spec.axis = ParseAblationAxis(j["axis"].get<std::string>());
    Take(j, "seeds", spec.seeds);
    if (j.contains("suite")) spec.suite = SuiteFromJson(j["suite"]);
    if (j.contains("base")) spec.base = TrainConfigFromJson(j["base"].dump());
    Take(j, "branch_values", spec.branch_values);
    Take(j, "stride_values", spec.stride_values);
    Take(j, "random_weight_draws", spec.random_weight_draws);
    Take(j, "workers", spec.workers);
  } catch (const json::exception& e) {
    ThrowData(std::string("invalid ablation config: ") + e.what());
  }
  return spec;
}

std::string GenerateDataset(const SuiteSpec& spec, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) ThrowIo("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["format"] = "spanet-dataset";
  manifest["version"] = 1;
  manifest["height"] = spec.height;
  manifest["width"] = spec.width;
  manifest["suite"] = SuiteToJson(spec);
  manifest["scenes"] = json::array();
  const std::vector<SuiteScene> plan = PlanSuite(spec);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const SuiteScene& planned = plan[i];
    const Scene scene = RealizeSuiteScene(planned, spec.noise);
    const std::string name = SceneName(i);
    WriteDensityPgm(dir / (name + ".pgm"), scene.image);
    WriteAnnotationsCsv(dir / (name + ".csv"), scene.annotations);
    json scene_json = {{"height", planned.spec.height},
                       {"width", planned.spec.width},
                       {"n_heads", planned.spec.n_heads},
                       {"gradient", DensityGradientName(planned.spec.gradient)},
                       {"head_sigma", planned.spec.head_sigma},
                       {"seed", planned.spec.seed},
                       {"noise_seed", planned.noise_seed},
                       {"noise", SuiteToJson(spec)["noise"]},
                       {"separation_warning", scene.separation_warning},
                       {"overdraws", scene.overdraws.size()}};
    WriteTextFile(dir / (name + ".json"), scene_json.dump(2) + "\n");
    manifest["scenes"].push_back({{"id", name},
                                  {"image", name + ".pgm"},
                                  {"annotations", name + ".csv"},
                                  {"spec", name + ".json"},
                                  {"seed", planned.spec.seed},
                                  {"noise_seed", planned.noise_seed},
                                  {"split", planned.train ? "train" : "val"},
                                  {"count", scene.annotations.count()},
                                  {"separation_warning", scene.separation_warning}});
  }
  const std::string text = manifest.dump(2);
  WriteTextFile(dir / "manifest.json", text + "\n");
  return text;
}

std::string RunGenerate(const std::string& config_json, const fs::path& dir) {
  const json config = Parse(config_json, "generation config");
  const SuiteSpec spec = config.contains("suite") ? SuiteFromJson(config["suite"]) : SuiteSpec{};
  return GenerateDataset(spec, dir);
}

Dataset LoadDataset(const fs::path& dir, double gt_sigma, int output_stride) {
  const json manifest = Parse(ReadTextFile(dir / "manifest.json"), "dataset manifest");
  Dataset data;
  try {
    const int height = manifest.at("height").get<int>();
    const int width = manifest.at("width").get<int>();
    for (const json& s : manifest.at("scenes")) {
      const DensityMap image = ReadPgm(dir / s.at("image").get<std::string>());
      if (image.height() != height || image.width() != width) {
        ThrowData("scene " + s.at("id").get<std::string>() + " does not match the manifest size");
      }
      const PointAnnotationSet ann =
          ReadAnnotationsCsv(dir / s.at("annotations").get<std::string>(), height, width);
      Sample sample{Image::FromMap(image), RenderGroundTruth(ann, gt_sigma, output_stride),
                    static_cast<double>(ann.count())};
      (s.value("split", "train") == "val" ? data.val : data.train).push_back(std::move(sample));
    }
  } catch (const json::exception& e) {
    ThrowData(std::string("invalid dataset manifest: ") + e.what());
  }
  if (data.train.empty()) ThrowData("dataset has no training scenes");
  return data;
}

std::string RunTraining(const std::string& config_json,
                        const std::optional<fs::path>& data_dir, const fs::path& out_dir) {
  const json config = Parse(config_json, "training config");
  const TrainConfig cfg =
      TrainConfigFromJson(config.contains("train") ? config["train"].dump() : "{}");
  SuiteSpec suite = config.contains("suite") ? SuiteFromJson(config["suite"]) : SuiteSpec{};
  suite.output_stride = cfg.output_stride;

  const Dataset data = data_dir ? LoadDataset(*data_dir, suite.gt_sigma, cfg.output_stride)
                                : MakeSyntheticSuite(suite);
  ConvDensityModel model = MakeInitialModel(cfg);
  const TrainReport report = Train(model, data, cfg);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) ThrowIo("cannot create " + out_dir.string() + ": " + ec.message());
  const std::string summary = ToJson(report, false);
  WriteTextFile(out_dir / "report.json", summary + "\n");
  WriteTextFile(out_dir / "curves.csv", CurvesCsv(report));
  std::string steps;
  for (const LossReport& s : report.steps) steps += json::parse(ToJson(s)).dump() + "\n";
  WriteTextFile(out_dir / "steps.jsonl", steps);
  model.SaveCheckpoint(out_dir / "checkpoint.json");
  return summary;
}

std::string EvaluateDirectories(const fs::path& pred_dir, const fs::path& gt_dir) {
  const auto preds = MapFilesByStem(pred_dir);
  const auto gts = MapFilesByStem(gt_dir);
  if (preds.empty()) ThrowData("no density maps in " + pred_dir.string());
  std::vector<double> est;
  std::vector<double> truth;
  double psnr = 0.0;
  double ssim = 0.0;
  json files = json::array();
  for (const auto& [stem, path] : preds) {
    const auto it = gts.find(stem);
    if (it == gts.end()) ThrowData("no ground truth for '" + stem + "'");
    const DensityMap pred = ReadMapFile(path);
    const DensityMap gt = ReadMapFile(it->second);
    const DensityMap sized = pred.SameShape(gt) ? pred : ResizeBilinear(pred, gt.height(), gt.width());
    const double p = Psnr(sized, gt);
    const double s = Ssim(sized, gt);
    est.push_back(TotalCount(pred));
    truth.push_back(TotalCount(gt));
    psnr += p;
    ssim += s;
    files.push_back({{"name", stem},
                     {"count", est.back()},
                     {"gt_count", truth.back()},
                     {"psnr", p},
                     {"ssim", s}});
  }
  const CountErrors e = MaeMse(est, truth);
  const double n = static_cast<double>(est.size());
  json report = {{"n", est.size()},
                 {"mae", e.mae},
                 {"mse", e.mse},
                 {"psnr", psnr / n},
                 {"ssim", ssim / n},
                 {"files", files}};
  return report.dump(2);
}

std::string RunAblationToDirectory(const AblationSpec& input, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) ThrowIo("cannot create " + out_dir.string() + ": " + ec.message());
  AblationSpec spec = input;
  spec.on_run = [&out_dir](const std::string& label, std::uint64_t seed, const TrainReport& r) {
    std::string safe = label;
    for (char& c : safe) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    }
    const fs::path run = out_dir / "runs" / (safe + "_seed" + std::to_string(seed));
    std::error_code err;
    fs::create_directories(run, err);
    if (err) ThrowIo("cannot create " + run.string());
    WriteTextFile(run / "report.json", ToJson(r, false) + "\n");
    WriteTextFile(run / "curves.csv", CurvesCsv(r));
  };
  const AblationTable table = RunAblation(spec);
  const std::string text = ToJson(table);
  WriteTextFile(out_dir / "ablation.json", text + "\n");
  WriteTextFile(out_dir / "ablation.csv", ToCsv(table));
  return text;
}

std::string DefaultConfig(const std::string& command) {
  if (command == "gen") {
    SuiteSpec s;
    s.n_train = 1;
    s.n_val = 0;
    return json{{"suite", SuiteToJson(s)}}.dump(2);
  }
  if (command == "train") {
    return json{{"train", json::parse(ToJson(TrainConfig{}))},
                {"suite", SuiteToJson(SuiteSpec{})},
                {"data_dir", nullptr}}
        .dump(2);
  }
  if (command == "eval") return json{{"pred_dir", nullptr}, {"gt_dir", nullptr}}.dump(2);
  if (command == "mesa-check") {
    return json{{"pred", nullptr}, {"gt", nullptr}, {"workers", 1}, {"oracle_limit", 32}}.dump(2);
  }
  if (command == "export") {
    return json{{"map", nullptr},
                {"checkpoint", nullptr},
                {"image", nullptr},
                {"annotations", nullptr},
                {"name", "density"},
                {"masks", false},
                {"train", json::parse(ToJson(TrainConfig{}))},
                {"gt_sigma", SuiteSpec{}.gt_sigma}}
        .dump(2);
  }
  if (command == "ablate") return ToJson(AblationSpec{});
  ThrowUsage("unknown command '" + command + "'");
}

}  // namespace spanet
