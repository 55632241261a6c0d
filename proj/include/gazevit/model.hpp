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
#include <optional>
#include <vector>

#include "gazevit/heads.hpp"
#include "gazevit/vit.hpp"

namespace gazevit {

struct PairOutput {
  Tensor probs;  // [1×2] (p_left_safer, p_right_safer)
  Tensor score_left;
  Tensor score_right;
  Tensor h_left;  // [1×D]
  Tensor h_right;
  AttentionStack attn_left;
  AttentionStack attn_right;
};

/// Gaze patch distributions Ĝ_L, Ĝ_R for one pair.
struct GazeTargets {
  std::vector<double> left;
  std::vector<double> right;
};

struct PairLoss {
  Tensor cls;
  Tensor rank;
  std::optional<Tensor> attn;  // present only when the attention branch was built
  Tensor total;
};

/// Siamese ViT: one encoder shared by both images, plus classification and
/// scoring heads.
class SiameseModel {
 public:
  SiameseModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return encoder_.config(); }
  const VisionEncoder& encoder() const { return encoder_; }
  ScoreHead& scorer() { return scorer_; }

  EncoderOutput encode(Tape& tape, const Tensor& patches) const;
  PairOutput forward(Tape& tape, const Tensor& left_patches, const Tensor& right_patches) const;
  PairOutput forward(Tape& tape, const Image& left, const Image& right) const;

  /// All trainable tensors in a fixed, named order.
  ParameterList parameters() const;
  void zero_grad();
  /// Copies values (by position and name) from another model's parameters.
  void load_parameters(const ParameterList& source);
  SiameseModel clone() const;

 private:
  VisionEncoder encoder_;
  ClassificationHead classifier_;
  ScoreHead scorer_;
};

/// Builds the per-pair objective. The attention branch is constructed only
/// when `gaze` is non-null and `source` is set.
PairLoss pair_loss(Tape& tape, const PairOutput& out, Label y, const GazeTargets* gaze, const LossWeights& weights,
                   std::optional<AttentionSource> source);

/// Checkpoint = `config.json` sidecar + `params.egpc` blob in a directory.
/// The blob is "EGPC", u32 version, u32 count, then per array: u32 name
/// length, name bytes, u32 rank, u64 dims, little-endian f64 values.
void save_parameters(const ParameterList& params, const std::filesystem::path& path);
ParameterList read_parameters(const std::filesystem::path& path);

}  // namespace gazevit
