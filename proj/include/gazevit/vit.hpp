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
#include <string>
#include <vector>

#include "gazevit/image.hpp"
#include "gazevit/layers.hpp"

namespace gazevit {

enum class PositionalEncoding { kLearned, kSinusoidal };

/// Architecture of the shared encoder and the two prediction heads.
struct ModelConfig {
  std::size_t image_height = 64;
  std::size_t image_width = 64;
  std::size_t channels = 3;
  std::size_t patch_size = 8;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t embed_dim = 64;
  double mlp_ratio = 4.0;
  PositionalEncoding positional = PositionalEncoding::kLearned;
  double layer_norm_eps = 1e-6;
  // Empty means the defaults {D, D/2} and {D/2}.
  std::vector<std::size_t> classifier_hidden;
  std::vector<std::size_t> scorer_hidden;

  std::size_t grid_rows() const { return image_height / patch_size; }
  std::size_t grid_cols() const { return image_width / patch_size; }
  std::size_t num_patches() const { return grid_rows() * grid_cols(); }
  std::size_t sequence_length() const { return num_patches() + 1; }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::size_t head_dim() const { return embed_dim / heads; }
  std::size_t mlp_hidden() const;
  std::vector<std::size_t> classifier_widths() const;
  std::vector<std::size_t> scorer_widths() const;

  /// Throws InvalidInput when the invariants (divisibility, positivity) fail.
  void validate() const;
};

/// Head-averaged attention per layer, captured during encode().
struct AttentionStack {
  std::vector<Tensor> layers;                 // Ā(ℓ), each [(N+1)×(N+1)]
  std::vector<std::vector<Tensor>> per_head;  // diagnostics only

  std::size_t depth() const { return layers.size(); }
  bool empty() const { return layers.empty(); }
};

enum class AttentionSource { kRaw, kRollout };
const char* to_string(AttentionSource source);
AttentionSource attention_source_from_string(const std::string& name);

/// Length-N probability vector over patches (row-major patch order).
struct PatchAttention {
  Tensor weights;  // [1×N]
  AttentionSource source = AttentionSource::kRaw;

  std::vector<double> values() const { return {weights.data().begin(), weights.data().end()}; }
};

struct EncoderOutput {
  Tensor tokens;  // z(L), [(N+1)×D]; row 0 is CLS
  AttentionStack attention;
};

/// Flattens each P×P×C patch (row-major patches, then (y, x, c) within a
/// patch) into a row of an [N × P²C] matrix.
Tensor patchify(const Image& image, const ModelConfig& config);

/// Pre-norm ViT encoder. Parameters are created in a fixed order from the
/// seeded generator so identical seeds give identical models.
class VisionEncoder {
 public:
  VisionEncoder() = default;
  VisionEncoder(const ModelConfig& config, Rng& rng);

  /// Patch tokens + CLS prepended + positional embedding.
  Tensor embed(Tape& tape, const Tensor& patches) const;
  Tensor embed(Tape& tape, const Image& image) const { return embed(tape, patchify(image, config_)); }

  EncoderOutput encode(Tape& tape, const Tensor& tokens) const;

  /// Tensors that encode() reads for positional information (a parameter
  /// when learned, a constant otherwise).
  const Tensor& positional_embedding() const { return pos_embed_; }
  const Tensor& cls_token() const { return cls_token_; }
  const ModelConfig& config() const { return config_; }

  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  struct Block {
    LayerNorm norm1;
    Linear qkv;
    Linear proj;
    LayerNorm norm2;
    Linear fc1;
    Linear fc2;
  };

  Tensor attention_sublayer(Tape& tape, const Block& block, const Tensor& x, AttentionStack& stack) const;

  ModelConfig config_;
  Linear patch_proj_;
  Tensor cls_token_;
  Tensor pos_embed_;
  std::vector<Block> blocks_;
};

/// Returns z(L)[0, :] as a [1×D] tensor.
Tensor cls_descriptor(Tape& tape, const Tensor& tokens);

/// CLS row of the final layer, CLS→CLS entry dropped, renormalized.
PatchAttention raw_attention(Tape& tape, const AttentionStack& stack);
/// row-normalize(Ā + I).
Tensor residual_adjusted(Tape& tape, const Tensor& layer_attention);
/// R = Ã(1)·…·Ã(L).
Tensor rollout_matrix(Tape& tape, const AttentionStack& stack);
/// CLS row of R, CLS entry dropped, renormalized.
PatchAttention rollout(Tape& tape, const AttentionStack& stack);
PatchAttention extract_attention(Tape& tape, const AttentionStack& stack, AttentionSource source);

}  // namespace gazevit
