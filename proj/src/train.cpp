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
#include "gazevit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>

#include "gazevit/csv.hpp"
#include "gazevit/image.hpp"

namespace gazevit {
namespace fs = std::filesystem;

const char* to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::kNone: return "none";
    case AttentionMode::kRaw: return "raw";
    case AttentionMode::kRollout: return "rollout";
  }
  return "?";
}

AttentionMode attention_mode_from_string(const std::string& name) {
  if (name == "none") return AttentionMode::kNone;
  if (name == "raw") return AttentionMode::kRaw;
  if (name == "rollout") return AttentionMode::kRollout;
  throw InvalidInput("attention mode must be none, raw or rollout, got '" + name + "'");
}

std::optional<AttentionSource> source_of(AttentionMode mode) {
  if (mode == AttentionMode::kRaw) return AttentionSource::kRaw;
  if (mode == AttentionMode::kRollout) return AttentionSource::kRollout;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidInput("batch_size must be positive");
  if (max_epochs == 0) throw InvalidInput("max_epochs must be positive");
  if (!(optimizer.lr > 0.0)) throw InvalidInput("lr must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw InvalidInput("betas must lie in [0, 1)");
  if (!(optimizer.eps > 0.0)) throw InvalidInput("adam eps must be positive");
  if (optimizer.weight_decay < 0.0) throw InvalidInput("weight_decay must be non-negative");
  if (schedule.warmup_frac < 0.0 || schedule.warmup_frac >= 1.0) throw InvalidInput("warmup_frac must lie in [0, 1)");
  if (schedule.min_lr < 0.0 || schedule.min_lr > optimizer.lr) throw InvalidInput("min_lr must lie in [0, lr]");
  weights.validate();
}

double scheduled_lr(const AdamWConfig& opt, const ScheduleConfig& sched, std::size_t step, std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(std::ceil(sched.warmup_frac * static_cast<double>(total_steps)));
  if (step < warmup) return opt.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double span = static_cast<double>(std::max<std::size_t>(1, total_steps - warmup));
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
  return sched.min_lr + 0.5 * (opt.lr - sched.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(ParameterList params, const AdamWConfig& config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
    decay_.push_back(p.tensor.dim() == 2 && p.name.ends_with(".weight"));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    auto w = p.data();
    const auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    const double shrink = decay_[i] ? 1.0 - lr * config_.weight_decay : 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      w[k] = w[k] * shrink - lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
    }
  }
}

PatchGrid patch_grid(const ModelConfig& config) {
  return {config.image_height, config.image_width, config.grid_rows(), config.grid_cols()};
}

GazeArtifacts process_record_side(const ComparisonRecord& record, Side side, const ModelConfig& model,
                                  const GazeConfig& gaze) {
  const fs::path& file = side == Side::kLeft ? record.left_gaze : record.right_gaze;
  const TrialLayout layout = read_layout(file.parent_path() / "layout.json");
  const auto samples = read_gaze_csv(file);
  return process_gaze(samples, layout, side, gaze, patch_grid(model));
}

std::vector<PreparedPair> prepare_pairs(const std::vector<ComparisonRecord>& records, const ModelConfig& model,
                                        const GazeConfig& gaze, PrepareReport* report) {
  std::map<std::string, Tensor> cache;
  auto patches = [&](const fs::path& path) {
    auto it = cache.find(path.string());
    if (it != cache.end()) return it->second;
    Image img = load_image(path);
    if (img.height != model.image_height || img.width != model.image_width)
      img = resize_bilinear(img, model.image_height, model.image_width);
    Tensor t = patchify(img, model);
    cache.emplace(path.string(), t);
    return t;
  };
  std::vector<PreparedPair> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    PreparedPair p;
    p.record = r;
    p.left = patches(r.left_image);
    p.right = patches(r.right_image);
    if (r.has_gaze) {
      const GazeArtifacts l = process_record_side(r, Side::kLeft, model, gaze);
      const GazeArtifacts rr = process_record_side(r, Side::kRight, model, gaze);
      if (l.fixations.empty() || rr.fixations.empty()) {
        if (report)
          report->warnings.push_back(r.pair_id + ": no fixation inside the " + (l.fixations.empty() ? "left" : "right") +
                                     " region; gaze ignored for this pair");
      } else {
        p.gaze_left = SideGaze{l.patch_distribution.values, l.fixation_points, l.fixations};
        p.gaze_right = SideGaze{rr.patch_distribution.values, rr.fixation_points, rr.fixations};
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

bool uses_attention(const TrainConfig& config) {
  return config.attention != AttentionMode::kNone && config.weights.gaze > 0.0;
}

struct PairTerms {
  Tensor cls, rank;
  std::optional<Tensor> attn;
};

[[noreturn]] void diverged(const PreparedPair& pair, double cls, double rank, double attn) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(csv::format_double(v)); };
  nlohmann::ordered_json state;
  state["pair_id"] = pair.record.pair_id;
  state["loss_cls"] = num(cls);
  state["loss_rank"] = num(rank);
  state["loss_attn"] = num(attn);
  throw TrainingDiverged("non-finite loss on pair " + pair.record.pair_id, std::move(state));
}

PairTerms pair_terms(Tape& tape, const SiameseModel& model, const PreparedPair& pair, const TrainConfig& config) {
  const PairOutput out = model.forward(tape, pair.left, pair.right);
  PairTerms t;
  t.cls = loss_cls(tape, out.probs, pair.record.y);
  t.rank = loss_rank(tape, out.score_left, out.score_right, pair.record.y, config.weights.margin);
  // Check before the attention branch: non-finite maps cannot be renormalized.
  const double cls = t.cls.item(), rank = t.rank.item();
  if (!std::isfinite(cls) || !std::isfinite(rank)) diverged(pair, cls, rank, 0.0);
  if (uses_attention(config) && pair.has_gaze()) {
    const auto source = *source_of(config.attention);
    const GazeTargets g = pair.targets();
    t.attn = loss_attn(tape, extract_attention(tape, out.attn_left, source).weights,
                       extract_attention(tape, out.attn_right, source).weights, g.left, g.right);
    if (!std::isfinite(t.attn->item())) diverged(pair, cls, rank, t.attn->item());
  }
  return t;
}

struct PassStats {
  double loss = 0.0;
  double class_accuracy = 0.0;
  double rank_accuracy = 0.0;
};

PairPrediction predict(const PreparedPair& pair, const PairOutput& out) {
  PairPrediction p;
  p.pair_id = pair.record.pair_id;
  p.y = pair.record.y;
  p.p_left = out.probs.at(0, 0);
  p.p_right = out.probs.at(0, 1);
  p.s_left = out.score_left.item();
  p.s_right = out.score_right.item();
  const int cls = p.p_right > p.p_left ? 1 : p.p_left > p.p_right ? -1 : 0;
  const double d = p.s_right - p.s_left;
  const int rank = d > 0.0 ? 1 : d < 0.0 ? -1 : 0;
  p.class_correct = cls == to_int(p.y);
  p.rank_correct = rank == to_int(p.y);
  return p;
}

// Per-pair total loss, averaged, plus accuracies — one forward pass per pair.
PassStats pass(const SiameseModel& model, const std::vector<PreparedPair>& pairs, const TrainConfig& config) {
  PassStats s;
  if (pairs.empty()) return s;
  std::size_t cls_ok = 0, rank_ok = 0;
  for (const auto& pair : pairs) {
    Tape tape(false);
    const PairOutput out = model.forward(tape, pair.left, pair.right);
    const GazeTargets g = pair.has_gaze() ? pair.targets() : GazeTargets{};
    const bool with_attn = uses_attention(config) && pair.has_gaze();
    const PairLoss l =
        pair_loss(tape, out, pair.record.y, with_attn ? &g : nullptr, config.weights, source_of(config.attention));
    s.loss += l.total.item();
    const PairPrediction p = predict(pair, out);
    cls_ok += p.class_correct;
    rank_ok += p.rank_correct;
  }
  const auto n = static_cast<double>(pairs.size());
  s.loss /= n;
  s.class_accuracy = static_cast<double>(cls_ok) / n;
  s.rank_accuracy = static_cast<double>(rank_ok) / n;
  return s;
}

}  // namespace

BatchLoss accumulate_batch_gradients(SiameseModel& model, const std::vector<const PreparedPair*>& batch,
                                     const TrainConfig& config) {
  BatchLoss b;
  if (batch.empty()) return b;
  const bool attn = uses_attention(config);
  for (const auto* p : batch) b.gaze_pairs += (attn && p->has_gaze()) ? 1 : 0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double attn_w = b.gaze_pairs ? config.weights.gaze / static_cast<double>(b.gaze_pairs) : 0.0;
  for (const auto* p : batch) {
    Tape tape;
    const PairTerms t = pair_terms(tape, model, *p, config);
    const double cls = t.cls.item(), rank = t.rank.item();
    const double a = t.attn ? t.attn->item() : 0.0;
    Tensor objective = ops::scale(tape, ops::add(tape, t.cls, ops::scale(tape, t.rank, config.weights.rank)), inv_b);
    if (t.attn) objective = ops::add(tape, objective, ops::scale(tape, *t.attn, attn_w));
    backward(objective, tape);
    b.cls += cls * inv_b;
    b.rank += rank * inv_b;
    if (t.attn) b.attn += a / static_cast<double>(b.gaze_pairs);
  }
  b.total = b.cls + config.weights.rank * b.rank + config.weights.gaze * b.attn;
  return b;
}

double mean_pair_loss(const SiameseModel& model, const std::vector<PreparedPair>& pairs, const TrainConfig& config) {
  if (pairs.empty()) throw InvalidInput("mean_pair_loss needs at least one pair");
  return pass(model, pairs, config).loss;
}

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["train_loss"] = train_loss;
  j["train_cls"] = train_cls;
  j["train_rank"] = train_rank;
  j["train_attn"] = train_attn;
  if (val_loss) j["val_loss"] = *val_loss;
  if (train_class_accuracy) j["train_class_accuracy"] = *train_class_accuracy;
  if (train_rank_accuracy) j["train_rank_accuracy"] = *train_rank_accuracy;
  if (val_class_accuracy) j["val_class_accuracy"] = *val_class_accuracy;
  if (val_rank_accuracy) j["val_rank_accuracy"] = *val_rank_accuracy;
  j["improved"] = improved;
  return j;
}

TrainResult train_model(SiameseModel& model, const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& val,
                        const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train.empty()) throw InvalidInput("training split is empty");
  const std::size_t steps_per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.max_epochs;
  AdamW opt(model.parameters(), config.optimizer);
  Rng order_rng(config.seed ^ 0x6a09e667f3bcc909ULL);
  std::vector<std::size_t> order(train.size());

  TrainResult result;
  std::vector<std::vector<double>> best;
  std::size_t bad_epochs = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    double cls = 0, rank = 0, attn = 0, total = 0;
    std::size_t attn_batches = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<const PreparedPair*> batch;
      for (std::size_t i = s * config.batch_size; i < std::min(order.size(), (s + 1) * config.batch_size); ++i)
        batch.push_back(&train[order[i]]);
      model.zero_grad();
      BatchLoss b;
      try {
        b = accumulate_batch_gradients(model, batch, config);
      } catch (TrainingDiverged& e) {
        auto state = e.state();
        state["epoch"] = epoch;
        state["step"] = opt.steps();
        state["lr"] = scheduled_lr(config.optimizer, config.schedule, opt.steps(), total_steps);
        throw TrainingDiverged(e.what(), std::move(state));
      }
      rec.lr = scheduled_lr(config.optimizer, config.schedule, opt.steps(), total_steps);
      opt.step(rec.lr);
      const double w = static_cast<double>(batch.size());
      cls += b.cls * w;
      rank += b.rank * w;
      total += b.total * w;
      if (b.gaze_pairs) attn += b.attn, ++attn_batches;
    }
    const auto n = static_cast<double>(train.size());
    rec.train_cls = cls / n;
    rec.train_rank = rank / n;
    rec.train_attn = attn_batches ? attn / static_cast<double>(attn_batches) : 0.0;
    rec.train_loss = total / n;

    if (config.track_train_accuracy) {
      const PassStats s = pass(model, train, config);
      rec.train_class_accuracy = s.class_accuracy;
      rec.train_rank_accuracy = s.rank_accuracy;
    }
    bool stop = false;
    if (!val.empty()) {
      const PassStats s = pass(model, val, config);
      rec.val_loss = s.loss;
      rec.val_class_accuracy = s.class_accuracy;
      rec.val_rank_accuracy = s.rank_accuracy;
      if (!result.best_val_loss || s.loss < *result.best_val_loss) {
        result.best_val_loss = s.loss;
        result.best_epoch = epoch;
        rec.improved = true;
        bad_epochs = 0;
        best.clear();
        for (const auto& p : model.parameters()) best.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
      } else if (config.patience > 0 && ++bad_epochs >= config.patience) {
        result.early_stopped = stop = true;
      }
    } else {
      result.best_epoch = epoch;
    }
    if (config.stop_at_train_accuracy > 0.0 && rec.train_class_accuracy &&
        *rec.train_class_accuracy >= config.stop_at_train_accuracy &&
        *rec.train_rank_accuracy >= config.stop_at_train_accuracy) {
      result.reached_target = stop = true;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stop) break;
  }
  if (!best.empty()) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) std::ranges::copy(best[i], params[i].tensor.data().begin());
  }
  return result;
}

EvalResult evaluate(const SiameseModel& model, const std::vector<PreparedPair>& pairs) {
  if (pairs.empty()) throw InvalidInput("evaluation set is empty");
  EvalResult r;
  std::size_t cls_ok = 0, rank_ok = 0;
  for (const auto& pair : pairs) {
    Tape tape(false);
    const PairPrediction p = predict(pair, model.forward(tape, pair.left, pair.right));
    cls_ok += p.class_correct;
    rank_ok += p.rank_correct;
    r.predictions.push_back(p);
  }
  r.class_accuracy = static_cast<double>(cls_ok) / static_cast<double>(pairs.size());
  r.rank_accuracy = static_cast<double>(rank_ok) / static_cast<double>(pairs.size());
  return r;
}

void write_predictions_csv(const EvalResult& result, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "pair_id,y,p_left,p_right,s_left,s_right,class_correct,rank_correct\n";
  for (const auto& p : result.predictions)
    out << csv::escape(p.pair_id) << ',' << to_int(p.y) << ',' << csv::format_double(p.p_left) << ','
        << csv::format_double(p.p_right) << ',' << csv::format_double(p.s_left) << ',' << csv::format_double(p.s_right)
        << ',' << (p.class_correct ? 1 : 0) << ',' << (p.rank_correct ? 1 : 0) << '\n';
}

MeanCI mean_ci95(const std::vector<double>& values) {
  MeanCI ci;
  ci.n = values.size();
  if (values.empty()) return ci;
  for (double v : values) ci.mean += v;
  ci.mean /= static_cast<double>(values.size());
  if (values.size() < 2) {
    ci.half_width = std::numeric_limits<double>::quiet_NaN();
    return ci;
  }
  double ss = 0;
  for (double v : values) ss += (v - ci.mean) * (v - ci.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  const boost::math::students_t dist(static_cast<double>(values.size() - 1));
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  ci.half_width = q * sd / std::sqrt(static_cast<double>(values.size()));
  return ci;
}

}  // namespace gazevit
