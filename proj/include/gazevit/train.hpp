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
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazevit/dataset.hpp"
#include "gazevit/gaze.hpp"
#include "gazevit/model.hpp"

namespace gazevit {

enum class AttentionMode { kNone, kRaw, kRollout };
const char* to_string(AttentionMode mode);
AttentionMode attention_mode_from_string(const std::string& name);
std::optional<AttentionSource> source_of(AttentionMode mode);

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct ScheduleConfig {
  double warmup_frac = 0.05;
  double min_lr = 1e-6;
};

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 50;
  std::size_t patience = 3;  // 0 disables early stopping
  AdamWConfig optimizer;
  ScheduleConfig schedule;
  LossWeights weights;
  AttentionMode attention = AttentionMode::kRaw;
  std::uint64_t seed = 0;
  // Measure train-set accuracy every epoch (one extra forward pass per pair).
  bool track_train_accuracy = false;
  // Stop once both train accuracies reach this value (needs tracking; ≤0 off).
  double stop_at_train_accuracy = 0.0;

  void validate() const;
};

/// Learning rate at optimizer step `step` (0-based) of `total_steps`: linear
/// warmup over ⌈warmup_frac·total⌉ steps, then cosine decay to min_lr.
double scheduled_lr(const AdamWConfig& opt, const ScheduleConfig& sched, std::size_t step, std::size_t total_steps);

/// Decoupled-weight-decay Adam. Decay applies to 2-D weight matrices only
/// (not biases, norms, CLS token or positional embeddings).
class AdamW {
 public:
  AdamW(ParameterList params, const AdamWConfig& config);
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  ParameterList params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<bool> decay_;
  std::size_t t_ = 0;
};

/// Per-side gaze targets at the model's patch resolution.
struct SideGaze {
  std::vector<double> distribution;  // Ĝ
  SaliencyGrid fixation_points;
  std::vector<FixationEvent> fixations;
};

/// A comparison with decoded model inputs.
struct PreparedPair {
  ComparisonRecord record;
  Tensor left;   // patches
  Tensor right;
  std::optional<SideGaze> gaze_left, gaze_right;

  bool has_gaze() const { return gaze_left.has_value() && gaze_right.has_value(); }
  GazeTargets targets() const { return {gaze_left->distribution, gaze_right->distribution}; }
};

struct PrepareReport {
  std::vector<std::string> warnings;
};

/// Decodes, resizes and patchifies images (cached per path) and runs the gaze
/// pipeline for gaze-bearing records. A side without any fixation inside its
/// region drops the pair's gaze with a warning.
std::vector<PreparedPair> prepare_pairs(const std::vector<ComparisonRecord>& records, const ModelConfig& model,
                                        const GazeConfig& gaze, PrepareReport* report = nullptr);
PatchGrid patch_grid(const ModelConfig& config);
/// Gaze artifacts for one side of a record (layout.json beside the file).
GazeArtifacts process_record_side(const ComparisonRecord& record, Side side, const ModelConfig& model,
                                  const GazeConfig& gaze);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // at the epoch's last step
  double train_loss = 0.0, train_cls = 0.0, train_rank = 0.0, train_attn = 0.0;
  std::optional<double> val_loss;
  std::optional<double> train_class_accuracy, train_rank_accuracy;
  std::optional<double> val_class_accuracy, val_rank_accuracy;
  bool improved = false;
  double seconds = 0.0;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  std::optional<double> best_val_loss;
  bool early_stopped = false;
  bool reached_target = false;
};

/// Non-finite loss during training; `state` describes where it happened.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, nlohmann::ordered_json state)
      : std::runtime_error(what), state_(std::move(state)) {}
  const nlohmann::ordered_json& state() const { return state_; }

 private:
  nlohmann::ordered_json state_;
};

/// Batch objective: mean L_cls + λ_rank·mean L_rank + λ_gaze·(mean L_attn over
/// the batch's gaze-bearing pairs). The attention branch is only built when
/// λ_gaze > 0 and the mode is not kNone.
struct BatchLoss {
  double total = 0.0, cls = 0.0, rank = 0.0, attn = 0.0;
  std::size_t gaze_pairs = 0;
};
BatchLoss accumulate_batch_gradients(SiameseModel& model, const std::vector<const PreparedPair*>& batch,
                                     const TrainConfig& config);

/// Mean per-pair total loss with has_gaze honored per pair.
double mean_pair_loss(const SiameseModel& model, const std::vector<PreparedPair>& pairs, const TrainConfig& config);

/// Mini-batch AdamW training. When `val` is non-empty the model ends holding
/// the best-validation parameters; otherwise the final ones.
TrainResult train_model(SiameseModel& model, const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& val,
                        const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});

struct PairPrediction {
  std::string pair_id;
  Label y = Label::kLeftSafer;
  double p_left = 0.0, p_right = 0.0;
  double s_left = 0.0, s_right = 0.0;
  bool class_correct = false;  // argmax p = y (a probability tie is wrong)
  bool rank_correct = false;   // sign(s_R − s_L) = y (a score tie is wrong)
};

struct EvalResult {
  double class_accuracy = 0.0;
  double rank_accuracy = 0.0;
  std::vector<PairPrediction> predictions;
};

EvalResult evaluate(const SiameseModel& model, const std::vector<PreparedPair>& pairs);
void write_predictions_csv(const EvalResult& result, const std::filesystem::path& path);

/// Mean and 95% Student-t half-width over independent runs.
struct MeanCI {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;
};
MeanCI mean_ci95(const std::vector<double>& values);

}  // namespace gazevit
