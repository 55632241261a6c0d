/*
 * Copyright 2026 The gazevit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "gazevit/config.hpp"

#include <fstream>
#include <set>

namespace gazevit {
namespace fs = std::filesystem;

namespace {

// Reads the known keys of one object and rejects everything else.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput(where_ + ": expected a JSON object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : j_.items())
      if (!known_.contains(key)) throw InvalidInput(where_ + ": unknown key '" + key + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(where_ + "." + key + ": " + e.what());
    }
  }
  const Json* object(const char* key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> known_;
};

}  // namespace

Json to_json(const ModelConfig& c) {
  Json j;
  j["image_height"] = c.image_height;
  j["image_width"] = c.image_width;
  j["channels"] = c.channels;
  j["patch_size"] = c.patch_size;
  j["depth"] = c.depth;
  j["heads"] = c.heads;
  j["embed_dim"] = c.embed_dim;
  j["mlp_ratio"] = c.mlp_ratio;
  j["positional"] = c.positional == PositionalEncoding::kLearned ? "learned" : "sinusoidal";
  j["layer_norm_eps"] = c.layer_norm_eps;
  j["classifier_hidden"] = c.classifier_widths();
  j["scorer_hidden"] = c.scorer_widths();
  return j;
}

void from_json(const Json& j, ModelConfig& c) {
  Reader r(j, "model");
  r.get("image_height", c.image_height);
  r.get("image_width", c.image_width);
  r.get("channels", c.channels);
  r.get("patch_size", c.patch_size);
  r.get("depth", c.depth);
  r.get("heads", c.heads);
  r.get("embed_dim", c.embed_dim);
  r.get("mlp_ratio", c.mlp_ratio);
  std::string pos = c.positional == PositionalEncoding::kLearned ? "learned" : "sinusoidal";
  r.get("positional", pos);
  if (pos == "learned") c.positional = PositionalEncoding::kLearned;
  else if (pos == "sinusoidal") c.positional = PositionalEncoding::kSinusoidal;
  else throw InvalidInput("model.positional must be learned or sinusoidal");
  r.get("layer_norm_eps", c.layer_norm_eps);
  r.get("classifier_hidden", c.classifier_hidden);
  r.get("scorer_hidden", c.scorer_hidden);
  c.validate();
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps},
                    {"weight_decay", c.optimizer.weight_decay}};
  j["schedule"] = {{"warmup_frac", c.schedule.warmup_frac}, {"min_lr", c.schedule.min_lr}};
  j["lambda_rank"] = c.weights.rank;
  j["lambda_gaze"] = c.weights.gaze;
  j["margin"] = c.weights.margin;
  j["attention"] = to_string(c.attention);
  j["seed"] = c.seed;
  j["track_train_accuracy"] = c.track_train_accuracy;
  j["stop_at_train_accuracy"] = c.stop_at_train_accuracy;
  return j;
}

void from_json(const Json& j, TrainConfig& c) {
  Reader r(j, "train");
  r.get("batch_size", c.batch_size);
  r.get("max_epochs", c.max_epochs);
  r.get("patience", c.patience);
  if (const Json* o = r.object("optimizer")) {
    Reader ro(*o, r.path("optimizer"));
    ro.get("lr", c.optimizer.lr);
    ro.get("beta1", c.optimizer.beta1);
    ro.get("beta2", c.optimizer.beta2);
    ro.get("eps", c.optimizer.eps);
    ro.get("weight_decay", c.optimizer.weight_decay);
  }
  if (const Json* o = r.object("schedule")) {
    Reader rs(*o, r.path("schedule"));
    rs.get("warmup_frac", c.schedule.warmup_frac);
    rs.get("min_lr", c.schedule.min_lr);
  }
  r.get("lambda_rank", c.weights.rank);
  r.get("lambda_gaze", c.weights.gaze);
  r.get("margin", c.weights.margin);
  std::string mode = to_string(c.attention);
  r.get("attention", mode);
  c.attention = attention_mode_from_string(mode);
  r.get("seed", c.seed);
  r.get("track_train_accuracy", c.track_train_accuracy);
  r.get("stop_at_train_accuracy", c.stop_at_train_accuracy);
  c.validate();
}

Json to_json(const GazeConfig& c) {
  Json j;
  j["dispersion_px"] = c.dispersion_px;
  j["min_duration_ms"] = c.min_duration_ms;
  j["sigma_px"] = c.sigma_px;
  j["weighting"] = c.weighting == FixationWeighting::kDuration ? "duration" : "unit";
  j["eps"] = c.eps;
  return j;
}

void from_json(const Json& j, GazeConfig& c) {
  Reader r(j, "gaze");
  r.get("dispersion_px", c.dispersion_px);
  r.get("min_duration_ms", c.min_duration_ms);
  r.get("sigma_px", c.sigma_px);
  std::string w = c.weighting == FixationWeighting::kDuration ? "duration" : "unit";
  r.get("weighting", w);
  if (w == "duration") c.weighting = FixationWeighting::kDuration;
  else if (w == "unit") c.weighting = FixationWeighting::kUnit;
  else throw InvalidInput("gaze.weighting must be duration or unit");
  r.get("eps", c.eps);
  if (c.dispersion_px < 0 || c.min_duration_ms < 0 || c.sigma_px < 0 || !(c.eps > 0))
    throw InvalidInput("gaze: thresholds must be non-negative and eps positive");
}

Json to_json(const MetricSettings& c) {
  Json j;
  j["eps"] = c.eps;
  j["kl_base"] = c.kl_base == LogBase::kNatural ? "e" : "2";
  j["center_prior_baseline"] = c.center_prior_baseline;
  j["center_prior_sigma_frac"] = c.center_prior_sigma_frac;
  return j;
}

void from_json(const Json& j, MetricSettings& c) {
  Reader r(j, "metrics");
  r.get("eps", c.eps);
  std::string base = c.kl_base == LogBase::kNatural ? "e" : "2";
  r.get("kl_base", base);
  if (base == "e") c.kl_base = LogBase::kNatural;
  else if (base == "2") c.kl_base = LogBase::kTwo;
  else throw InvalidInput("metrics.kl_base must be \"e\" or \"2\"");
  r.get("center_prior_baseline", c.center_prior_baseline);
  r.get("center_prior_sigma_frac", c.center_prior_sigma_frac);
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["gaze"] = to_json(c.gaze);
  j["metrics"] = to_json(c.metrics);
  return j;
}

void from_json(const Json& j, ExperimentConfig& c) {
  Reader r(j, "config");
  if (const Json* o = r.object("model")) from_json(*o, c.model);
  if (const Json* o = r.object("train")) from_json(*o, c.train);
  if (const Json* o = r.object("gaze")) from_json(*o, c.gaze);
  if (const Json* o = r.object("metrics")) from_json(*o, c.metrics);
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_json_file(const Json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  ExperimentConfig c;
  from_json(read_json_file(path), c);
  return c;
}

void save_checkpoint(const SiameseModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  write_json_file(to_json(model.config()), dir / "config.json");
  save_parameters(model.parameters(), dir / "params.egpc");
}

SiameseModel load_checkpoint(const fs::path& dir) {
  ModelConfig c;
  from_json(read_json_file(dir / "config.json"), c);
  SiameseModel model(c, 0);
  model.load_parameters(read_parameters(dir / "params.egpc"));
  return model;
}

}  // namespace gazevit
