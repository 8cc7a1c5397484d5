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

// spanet command-line entry point: gen, train, eval, mesa-check, export, ablate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spanet/spanet.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kOutRootEnv = "SPANET_OUT_ROOT";
constexpr const char* kDefaultOutRoot = "spanet_runs";

// Raised inside the CLI; carries the exit code.
struct CliError {
  spanet_status status;
  std::string message;
};

const char* KindName(int code) {
  switch (code) {
    case SPANET_ERR_USAGE: return "usage";
    case SPANET_ERR_IO: return "io";
    case SPANET_ERR_DATA: return "data";
    default: return "internal";
  }
}

int ReportError(int code, const std::string& message) {
  json err = {{"error", {{"kind", KindName(code)}, {"code", code}, {"message", message}}}};
  std::cerr << err.dump() << std::endl;
  return code;
}

void Check(spanet_status status) {
  if (status != SPANET_OK) throw CliError{status, spanet_last_error()};
}

std::string TakeString(char* s) {
  std::string out = s ? s : "";
  spanet_string_free(s);
  return out;
}

struct DensityHandle {
  spanet_density* p = nullptr;
  DensityHandle() = default;
  DensityHandle(const DensityHandle&) = delete;
  DensityHandle& operator=(const DensityHandle&) = delete;
  ~DensityHandle() { spanet_density_destroy(p); }
};

struct ModelHandle {
  spanet_model* p = nullptr;
  ModelHandle() = default;
  ModelHandle(const ModelHandle&) = delete;
  ModelHandle& operator=(const ModelHandle&) = delete;
  ~ModelHandle() { spanet_model_destroy(p); }
};

json ParseJson(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CliError{SPANET_ERR_DATA, "malformed " + what + ": " + e.what()};
  }
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError{SPANET_ERR_IO, "cannot read " + p.string()};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError{SPANET_ERR_IO, "cannot write " + p.string()};
  out << text;
  if (!out) throw CliError{SPANET_ERR_IO, "write failed for " + p.string()};
}

std::vector<double> ParseNumberList(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CliError{SPANET_ERR_USAGE, "bad number '" + item + "' in " + what};
    }
  }
  return out;
}

// Recursive override. Unlike merge_patch, a null in the patch is kept as a
// value, so a resolved snapshot reads back unchanged.
void Overlay(json& base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      Overlay(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

// One subcommand: its options write into the config document only when
// they were given on the command line.
class Command {
 public:
  Command(CLI::App& app, std::string name, std::string description)
      : name_(std::move(name)), sub_(app.add_subcommand(name_, std::move(description))) {
    sub_->add_option("--config", config_file_, "JSON config; explicit flags override it");
    sub_->add_option("--out-dir", out_dir_,
                     std::string("Output directory (default: $") + kOutRootEnv + "/" + name_ + ")");
  }

  CLI::App* app() { return sub_; }
  const std::string& name() const { return name_; }

  template <typename T>
  CLI::Option* Bind(const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = sub_->add_option(flag, *value, help);
    setters_.push_back([opt, value, pointer](json& cfg) {
      if (opt->count() > 0) cfg[json::json_pointer(pointer)] = *value;
    });
    return opt;
  }

  // Free-form setter for flags that need translation.
  void Custom(CLI::Option* opt, std::function<void(json&)> apply) {
    setters_.push_back([opt, apply](json& cfg) {
      if (opt->count() > 0) apply(cfg);
    });
  }

  json Resolve() const {
    char* defaults = nullptr;
    Check(spanet_default_config(name_.c_str(), &defaults));
    json cfg = ParseJson(TakeString(defaults), "default config");
    if (!config_file_.empty()) {
      json file = ParseJson(ReadFile(config_file_), "config file " + config_file_);
      if (!file.is_object()) throw CliError{SPANET_ERR_DATA, "config file must hold an object"};
      if (file.contains("command")) {
        if (file["command"] != name_) {
          throw CliError{SPANET_ERR_USAGE, "config file is for command '" +
                                               file["command"].get<std::string>() + "'"};
        }
        file.erase("command");
      }
      Overlay(cfg, file);
    }
    for (const auto& set : setters_) set(cfg);
    return cfg;
  }

  fs::path OutDir() const {
    if (!out_dir_.empty()) return out_dir_;
    const char* root = std::getenv(kOutRootEnv);
    return fs::path(root && *root ? root : kDefaultOutRoot) / name_;
  }

 private:
  std::string name_;
  CLI::App* sub_;
  std::string config_file_;
  std::string out_dir_;
  std::vector<std::function<void(json&)>> setters_;
};

fs::path PrepareOut(const Command& cmd, const json& cfg) {
  const fs::path out = cmd.OutDir();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw CliError{SPANET_ERR_IO, "cannot create " + out.string() + ": " + ec.message()};
  json snapshot = cfg;
  snapshot["command"] = cmd.name();
  WriteFile(out / "resolved_config.json", snapshot.dump(2) + "\n");
  return out;
}

std::string RequireString(const json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg[key].is_string() || cfg[key].get<std::string>().empty()) {
    throw CliError{SPANET_ERR_USAGE, std::string("missing required setting '") + key + "'"};
  }
  return cfg[key].get<std::string>();
}

std::optional<std::string> OptionalString(const json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg[key].is_string() || cfg[key].get<std::string>().empty()) {
    return std::nullopt;
  }
  return cfg[key].get<std::string>();
}

// ---- commands -----------------------------------------------------------

void RunGen(const Command& cmd) {
  const json cfg = cmd.Resolve();
  const fs::path out = PrepareOut(cmd, cfg);
  char* manifest = nullptr;
  Check(spanet_generate_dataset(cfg.dump().c_str(), out.string().c_str(), &manifest));
  const json m = ParseJson(TakeString(manifest), "manifest");
  json summary = {{"out_dir", out.string()},
                  {"scenes", m["scenes"].size()},
                  {"manifest", (out / "manifest.json").string()}};
  std::cout << summary.dump(2) << std::endl;
}

void RunTrain(const Command& cmd) {
  const json cfg = cmd.Resolve();
  const fs::path out = PrepareOut(cmd, cfg);
  const auto data = OptionalString(cfg, "data_dir");
  char* report = nullptr;
  Check(spanet_train(cfg.dump().c_str(), data ? data->c_str() : nullptr, out.string().c_str(),
                     &report));
  const json r = ParseJson(TakeString(report), "training report");
  json summary = {{"out_dir", out.string()},
                  {"epochs", r["epochs"].size()},
                  {"final_val_mae", r["final_val_mae"]},
                  {"subregion_calls", r["subregion_calls"]}};
  std::cout << summary.dump(2) << std::endl;
}

void RunEval(const Command& cmd) {
  const json cfg = cmd.Resolve();
  const std::string pred = RequireString(cfg, "pred_dir");
  const std::string gt = RequireString(cfg, "gt_dir");
  const fs::path out = PrepareOut(cmd, cfg);
  char* report = nullptr;
  Check(spanet_evaluate_directories(pred.c_str(), gt.c_str(), &report));
  const std::string text = TakeString(report);
  WriteFile(out / "metrics.json", text + "\n");
  std::cout << text << std::endl;
}

void RunMesaCheck(const Command& cmd) {
  const json cfg = cmd.Resolve();
  const std::string pred_path = RequireString(cfg, "pred");
  const std::string gt_path = RequireString(cfg, "gt");
  const int oracle_limit = cfg.value("oracle_limit", 32);
  const fs::path out = PrepareOut(cmd, cfg);

  DensityHandle pred;
  DensityHandle gt;
  Check(spanet_density_read(pred_path.c_str(), &pred.p));
  Check(spanet_density_read(gt_path.c_str(), &gt.p));
  double value = 0.0;
  spanet_rect rect{};
  Check(spanet_mesa_exact(pred.p, gt.p, &value, &rect));

  json result = {{"value", value},
                 {"region",
                  {{"top", rect.top},
                   {"left", rect.left},
                   {"bottom", rect.bottom},
                   {"right", rect.right}}},
                 {"count_error",
                  std::abs(spanet_density_total(pred.p) - spanet_density_total(gt.p))}};
  const int h = spanet_density_height(pred.p);
  const int w = spanet_density_width(pred.p);
  if (h <= oracle_limit && w <= oracle_limit) {
    double oracle = 0.0;
    Check(spanet_mesa_bruteforce(pred.p, gt.p, &oracle));
    result["oracle"] = {{"value", oracle}, {"agrees", std::abs(oracle - value) <= 1e-9}};
  } else {
    result["oracle"] = nullptr;
  }
  const std::string text = result.dump(2);
  WriteFile(out / "mesa.json", text + "\n");
  std::cout << text << std::endl;
}

void RunExport(const Command& cmd) {
  const json cfg = cmd.Resolve();
  const auto map_path = OptionalString(cfg, "map");
  const auto checkpoint = OptionalString(cfg, "checkpoint");
  const auto image_path = OptionalString(cfg, "image");
  const auto annotations = OptionalString(cfg, "annotations");
  const std::string name = cfg.value("name", std::string("density"));
  const bool masks = cfg.value("masks", false);
  if (map_path.has_value() == checkpoint.has_value()) {
    throw CliError{SPANET_ERR_USAGE, "export needs either --map or --checkpoint with --image"};
  }
  if (checkpoint && !image_path) throw CliError{SPANET_ERR_USAGE, "--checkpoint needs --image"};
  if (masks && !checkpoint) throw CliError{SPANET_ERR_USAGE, "--masks needs a checkpoint"};
  const fs::path out = PrepareOut(cmd, cfg);

  json written = json::array();
  DensityHandle density;
  if (map_path) {
    Check(spanet_density_read(map_path->c_str(), &density.p));
  } else {
    ModelHandle model;
    DensityHandle image;
    Check(spanet_model_load(checkpoint->c_str(), &model.p));
    Check(spanet_density_read(image_path->c_str(), &image.p));
    Check(spanet_model_forward(model.p, image.p, &density.p));
    if (masks) {
      const json train = cfg.value("train", json::object());
      DensityHandle gt;
      if (annotations) {
        const int stride = train.value("output_stride", 1);
        Check(spanet_render_annotations(annotations->c_str(), spanet_density_height(image.p),
                                        spanet_density_width(image.p),
                                        cfg.value("gt_sigma", 2.0), stride, &gt.p));
      }
      DensityHandle mask;
      Check(spanet_model_subregion(model.p, image.p, gt.p, train.dump().c_str(), &mask.p));
      const std::string pgm = (out / (name + "_mask.pgm")).string();
      const std::string csv = (out / (name + "_mask.csv")).string();
      Check(spanet_mask_write(mask.p, pgm.c_str(), csv.c_str()));
      written.push_back(pgm);
      written.push_back(csv);
    }
  }
  const std::string pgm = (out / (name + ".pgm")).string();
  const std::string csv = (out / (name + ".csv")).string();
  Check(spanet_density_write(density.p, pgm.c_str()));
  Check(spanet_density_write(density.p, csv.c_str()));
  written.insert(written.begin(), {pgm, csv});
  std::cout << json{{"count", spanet_density_total(density.p)}, {"files", written}}.dump(2)
            << std::endl;
}

void RunAblate(const Command& cmd) {
  const json cfg = cmd.Resolve();
  const fs::path out = PrepareOut(cmd, cfg);
  char* table = nullptr;
  Check(spanet_ablate(cfg.dump().c_str(), out.string().c_str(), &table));
  const json t = ParseJson(TakeString(table), "ablation table");
  json summary = {{"out_dir", out.string()}, {"axis", t["axis"]}, {"rows", json::array()}};
  for (const json& row : t["rows"]) {
    summary["rows"].push_back({{"label", row["label"]}, {"median_mae", row["median_mae"]}});
  }
  std::cout << summary.dump(2) << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spanet: crowd-counting loss machinery at desk scale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", spanet_version());

  Command gen(app, "gen", "Generate synthetic crowd scenes");
  gen.Bind<int>("--height", "/suite/height", "Scene height in pixels");
  gen.Bind<int>("--width", "/suite/width", "Scene width in pixels");
  {
    auto n = std::make_shared<int>(0);
    CLI::Option* opt = gen.app()->add_option("--n-heads", *n, "Fixed head count per scene");
    gen.Custom(opt, [n](json& cfg) {
      cfg["suite"]["min_heads"] = *n;
      cfg["suite"]["max_heads"] = *n;
    });
  }
  gen.Bind<int>("--min-heads", "/suite/min_heads", "Smallest head count");
  gen.Bind<int>("--max-heads", "/suite/max_heads", "Largest head count");
  gen.Bind<int>("--scenes", "/suite/n_train", "Number of training scenes");
  gen.Bind<int>("--val", "/suite/n_val", "Number of validation scenes");
  gen.Bind<std::string>("--gradient", "/suite/gradient", "uniform, left-dense or radial");
  gen.Bind<double>("--head-sigma", "/suite/head_sigma", "Blob radius in pixels");
  gen.Bind<double>("--noise-std", "/suite/noise/zero_mean_std", "Additive Gaussian noise");
  gen.Bind<double>("--size-jitter", "/suite/noise/size_jitter", "Blob radius jitter fraction");
  gen.Bind<double>("--occlusion", "/suite/noise/occlusion_rate", "Occlusion probability");
  gen.Bind<std::uint64_t>("--seed", "/suite/seed", "Random seed");

  Command train(app, "train", "Train the density regressor");
  train.Bind<std::string>("--mode", "/train/loss_mode", "L2, Lr+Lmep, L2+Lr or L2+Lr+Lmep");
  train.Bind<int>("--K", "/train/K", "Branch count (0 selects H/8)");
  train.Bind<std::string>("--anchor", "/train/anchor",
                          "bottom-right, bottom-left, top-right, top-left or center");
  train.Bind<int>("--epochs", "/train/epochs", "Epoch count");
  train.Bind<double>("--lr", "/train/lr", "Learning rate");
  train.Bind<int>("--batch-size", "/train/batch_size", "Images per step");
  train.Bind<std::string>("--optimizer", "/train/optimizer", "sgd or adam");
  {
    auto seed = std::make_shared<std::uint64_t>(0);
    CLI::Option* opt = train.app()->add_option("--seed", *seed, "Seed for data and init");
    train.Custom(opt, [seed](json& cfg) {
      cfg["train"]["seed"] = *seed;
      cfg["suite"]["seed"] = *seed;
    });
  }
  {
    auto text = std::make_shared<std::string>();
    CLI::Option* opt = train.app()->add_option("--weights", *text, "w_r,w_mep,w_l2");
    train.Custom(opt, [text](json& cfg) {
      const auto w = ParseNumberList(*text, "--weights");
      if (w.size() != 3) throw CliError{SPANET_ERR_USAGE, "--weights takes three numbers"};
      cfg["train"]["weights"] = w;
    });
  }
  train.Bind<std::string>("--xi-mode", "/train/xi_mode", "constant or ground-truth");
  train.Bind<double>("--xi", "/train/xi", "Constant ranking margin");
  {
    auto pooling = std::make_shared<std::string>();
    CLI::Option* opt =
        train.app()->add_option("--pooling", *pooling, "same or different density map");
    opt->check(CLI::IsMember({"same", "different"}));
    train.Custom(opt, [pooling](json& cfg) {
      cfg["train"]["same_map_pooling"] = *pooling == "same";
    });
  }
  {
    auto flag = std::make_shared<bool>(false);
    CLI::Option* opt = train.app()->add_flag("--dry-rank", *flag,
                                             "Keep ranking updates off the trained model");
    train.Custom(opt, [](json& cfg) { cfg["train"]["dry_rank"] = true; });
  }
  train.Bind<int>("--stride", "/train/output_stride", "Output stride of the density map");
  train.Bind<int>("--n-train", "/suite/n_train", "Synthetic training images");
  train.Bind<int>("--n-val", "/suite/n_val", "Synthetic validation images");
  train.Bind<std::string>("--gradient", "/suite/gradient", "Synthetic density gradient");
  train.Bind<double>("--noise-std", "/suite/noise/zero_mean_std", "Synthetic image noise");
  train.Bind<std::string>("--data-dir", "/data_dir", "Dataset written by gen");

  Command eval(app, "eval", "Score predicted density maps against ground truth");
  eval.Bind<std::string>("pred_dir", "/pred_dir", "Directory of predicted maps");
  eval.Bind<std::string>("gt_dir", "/gt_dir", "Directory of ground-truth maps");

  Command mesa(app, "mesa-check", "Exact MESA between two density maps");
  mesa.Bind<std::string>("pred", "/pred", "Predicted map (.csv or .pgm)");
  mesa.Bind<std::string>("gt", "/gt", "Ground-truth map (.csv or .pgm)");
  mesa.Bind<int>("--oracle-limit", "/oracle_limit",
                 "Largest side for the exhaustive cross-check");

  Command exp(app, "export", "Write density maps (and masks) as PGM and CSV");
  exp.Bind<std::string>("--map", "/map", "Density map to convert");
  exp.Bind<std::string>("--checkpoint", "/checkpoint", "Model checkpoint");
  exp.Bind<std::string>("--image", "/image", "Scene image for the checkpoint");
  exp.Bind<std::string>("--annotations", "/annotations", "Annotation CSV for the mask search");
  exp.Bind<std::string>("--name", "/name", "Output file stem");
  {
    auto flag = std::make_shared<bool>(false);
    CLI::Option* opt = exp.app()->add_flag("--masks", *flag, "Also export discrepancy masks");
    exp.Custom(opt, [](json& cfg) { cfg["masks"] = true; });
  }

  Command ablate(app, "ablate", "Sweep one experiment axis over several seeds");
  ablate.Bind<std::string>("--axis", "/axis", "loss_mode, anchor, pooling, K, stride or weights");
  {
    auto text = std::make_shared<std::string>();
    CLI::Option* opt = ablate.app()->add_option("--seeds", *text, "Comma separated seeds");
    ablate.Custom(opt, [text](json& cfg) {
      std::vector<std::uint64_t> seeds;
      for (double v : ParseNumberList(*text, "--seeds")) {
        if (v < 0) throw CliError{SPANET_ERR_USAGE, "seeds must be non-negative"};
        seeds.push_back(static_cast<std::uint64_t>(v));
      }
      cfg["seeds"] = seeds;
    });
  }
  {
    auto text = std::make_shared<std::string>();
    CLI::Option* opt = ablate.app()->add_option("--K-values", *text, "Branch counts for the K axis");
    ablate.Custom(opt, [text](json& cfg) {
      std::vector<int> ks;
      for (double v : ParseNumberList(*text, "--K-values")) ks.push_back(static_cast<int>(v));
      cfg["branch_values"] = ks;
    });
  }
  ablate.Bind<int>("--epochs", "/base/epochs", "Epochs per run");
  ablate.Bind<std::string>("--mode", "/base/loss_mode", "Loss mode of the base config");
  ablate.Bind<int>("--n-train", "/suite/n_train", "Synthetic training images");
  ablate.Bind<int>("--n-val", "/suite/n_val", "Synthetic validation images");
  ablate.Bind<int>("--height", "/suite/height", "Scene height");
  ablate.Bind<int>("--width", "/suite/width", "Scene width");
  ablate.Bind<int>("--workers", "/workers", "Parallel runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return ReportError(SPANET_ERR_USAGE, e.what());
  }

  try {
    if (gen.app()->parsed()) RunGen(gen);
    if (train.app()->parsed()) RunTrain(train);
    if (eval.app()->parsed()) RunEval(eval);
    if (mesa.app()->parsed()) RunMesaCheck(mesa);
    if (exp.app()->parsed()) RunExport(exp);
    if (ablate.app()->parsed()) RunAblate(ablate);
  } catch (const CliError& e) {
    return ReportError(e.status, e.message);
  } catch (const json::exception& e) {
    return ReportError(SPANET_ERR_DATA, e.what());
  } catch (const std::exception& e) {
    return ReportError(SPANET_ERR_INTERNAL, e.what());
  }
  return 0;
}
