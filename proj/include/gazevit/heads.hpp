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

#include <optional>
#include <span>
#include <vector>

#include "gazevit/layers.hpp"
#include "gazevit/vit.hpp"

namespace gazevit {

/// Pairwise preference. Ties are not representable.
enum class Label : int { kLeftSafer = -1, kRightSafer = 1 };

/// Accepts only -1 and +1.
Label label_from_int(int value);
inline int to_int(Label y) { return static_cast<int>(y); }
/// Index into (p_left_safer, p_right_safer).
inline std::size_t class_index(Label y) { return y == Label::kLeftSafer ? 0 : 1; }
inline Label mirrored(Label y) { return y == Label::kLeftSafer ? Label::kRightSafer : Label::kLeftSafer; }

struct LossWeights {
  double rank = 1.0;   // λ_rank
  double gaze = 1.0;   // λ_gaze
  double margin = 1.0; // γ

  void validate() const;
};

/// 3-layer MLP on [h_L; h_R] followed by a 2-way softmax.
class ClassificationHead {
 public:
  ClassificationHead() = default;
  ClassificationHead(std::size_t embed_dim, const std::vector<std::size_t>& hidden, Rng& rng);

  /// Returns (p_left_safer, p_right_safer) as [1×2].
  Tensor operator()(Tape& tape, const Tensor& h_left, const Tensor& h_right) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Linear fc1_, fc2_, fc3_;
};

/// Shared scalar scoring MLP; larger means perceived safer.
class ScoreHead {
 public:
  ScoreHead() = default;
  ScoreHead(std::size_t embed_dim, const std::vector<std::size_t>& hidden, Rng& rng);

  /// Scalar score.
  Tensor operator()(Tape& tape, const Tensor& h) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  /// Zeroes every weight (used by tests and ablations).
  void zero();

 private:
  std::vector<Linear> layers_;
};

/// -ln p_y.
Tensor loss_cls(Tape& tape, const Tensor& probs, Label y);
/// max(0, γ − y·(s_R − s_L)).
Tensor loss_rank(Tape& tape, const Tensor& score_left, const Tensor& score_right, Label y, double margin);
/// ½·[KL(Ĝ_L‖M_L) + KL(Ĝ_R‖M_R)] in nats; gaze distributions are constants.
Tensor loss_attn(Tape& tape, const Tensor& m_left, const Tensor& m_right, std::span<const double> gaze_left,
                 std::span<const double> gaze_right);
/// L_cls + λ_rank·L_rank + λ_gaze·1[has_gaze]·L_attn. With has_gaze false
/// the attention term is never touched and may be absent.
Tensor total_loss(Tape& tape, const Tensor& cls, const Tensor& rank, const std::optional<Tensor>& attn,
                  const LossWeights& weights, bool has_gaze);

}  // namespace gazevit
