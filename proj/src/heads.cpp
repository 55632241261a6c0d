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
#include "gazevit/heads.hpp"

#include <cmath>

namespace gazevit {

Label label_from_int(int value) {
  if (value == -1) return Label::kLeftSafer;
  if (value == 1) return Label::kRightSafer;
  throw InvalidInput("label must be -1 or +1, got " + std::to_string(value));
}

void LossWeights::validate() const {
  if (!(rank >= 0.0)) throw InvalidInput("lambda_rank must be >= 0");
  if (!(gaze >= 0.0)) throw InvalidInput("lambda_gaze must be >= 0");
  if (!(margin > 0.0)) throw InvalidInput("ranking margin must be > 0");
}

ClassificationHead::ClassificationHead(std::size_t embed_dim, const std::vector<std::size_t>& hidden, Rng& rng) {
  if (hidden.size() != 2) throw InvalidInput("classification head takes two hidden widths");
  fc1_ = Linear(2 * embed_dim, hidden[0], rng);
  fc2_ = Linear(hidden[0], hidden[1], rng);
  fc3_ = Linear(hidden[1], 2, rng);
}

Tensor ClassificationHead::operator()(Tape& tape, const Tensor& h_left, const Tensor& h_right) const {
  const Tensor parts[] = {h_left, h_right};
  Tensor x = ops::concat_cols(tape, parts);
  x = ops::gelu(tape, fc1_(tape, x));
  x = ops::gelu(tape, fc2_(tape, x));
  return ops::softmax(tape, fc3_(tape, x), 1);
}

void ClassificationHead::collect(const std::string& prefix, ParameterList& out) const {
  fc1_.collect(prefix + ".fc1", out);
  fc2_.collect(prefix + ".fc2", out);
  fc3_.collect(prefix + ".fc3", out);
}

ScoreHead::ScoreHead(std::size_t embed_dim, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::size_t in = embed_dim;
  for (auto w : hidden) {
    layers_.emplace_back(in, w, rng);
    in = w;
  }
  layers_.emplace_back(in, 1, rng);
}

Tensor ScoreHead::operator()(Tape& tape, const Tensor& h) const {
  Tensor x = h;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](tape, x);
    if (i + 1 < layers_.size()) x = ops::gelu(tape, x);
  }
  return ops::element(tape, x, 0);
}

void ScoreHead::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + ".fc" + std::to_string(i + 1), out);
}

void ScoreHead::zero() {
  for (auto& l : layers_) {
    for (auto& v : l.weight.data()) v = 0.0;
    for (auto& v : l.bias.data()) v = 0.0;
  }
}

Tensor loss_cls(Tape& tape, const Tensor& probs, Label y) {
  if (probs.numel() != 2) throw InvalidInput("classification output must hold two probabilities");
  return ops::scale(tape, ops::log(tape, ops::element(tape, probs, class_index(y))), -1.0);
}

Tensor loss_rank(Tape& tape, const Tensor& score_left, const Tensor& score_right, Label y, double margin) {
  if (!(margin > 0.0)) throw InvalidInput("ranking margin must be > 0");
  const Tensor agreement = ops::scale(tape, ops::sub(tape, score_right, score_left), static_cast<double>(to_int(y)));
  return ops::relu(tape, ops::sub(tape, Tensor::scalar(margin), agreement));
}

namespace {

Tensor kl_from_constant(Tape& tape, std::span<const double> g, const Tensor& m) {
  if (g.size() != m.numel())
    throw InvalidInput("attention/gaze length mismatch: " + std::to_string(m.numel()) + " vs " +
                       std::to_string(g.size()));
  const Tensor gaze(m.shape(), std::vector<double>(g.begin(), g.end()));
  // Same ops for both sums so KL(G‖G) is exactly zero. Zero-mass cells use
  // log 1 = 0 in place of 0·log 0.
  std::vector<double> safe(g.begin(), g.end());
  for (auto& v : safe)
    if (v == 0.0) v = 1.0;
  Tape constant(false);
  const Tensor entropy = ops::sum(constant, ops::mul(constant, gaze, ops::log(constant, Tensor(m.shape(), safe))));
  const Tensor cross = ops::sum(tape, ops::mul(tape, gaze, ops::log(tape, m)));
  return ops::sub(tape, entropy, cross);
}

}  // namespace

Tensor loss_attn(Tape& tape, const Tensor& m_left, const Tensor& m_right, std::span<const double> gaze_left,
                 std::span<const double> gaze_right) {
  if (m_left.numel() != m_right.numel()) throw InvalidInput("left/right attention maps differ in length");
  const Tensor parts[] = {kl_from_constant(tape, gaze_left, m_left), kl_from_constant(tape, gaze_right, m_right)};
  return ops::average(tape, parts);
}

Tensor total_loss(Tape& tape, const Tensor& cls, const Tensor& rank, const std::optional<Tensor>& attn,
                  const LossWeights& weights, bool has_gaze) {
  Tensor total = ops::add(tape, cls, ops::scale(tape, rank, weights.rank));
  if (has_gaze) {
    if (!attn) throw InvalidInput("has_gaze is set but no attention loss was supplied");
    total = ops::add(tape, total, ops::scale(tape, *attn, weights.gaze));
  }
  return total;
}

}  // namespace gazevit
