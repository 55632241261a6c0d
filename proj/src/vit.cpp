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
#include "gazevit/vit.hpp"

#include <cmath>

namespace gazevit {

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
}

std::vector<std::size_t> ModelConfig::classifier_widths() const {
  if (!classifier_hidden.empty()) return classifier_hidden;
  return {embed_dim, std::max<std::size_t>(embed_dim / 2, 1)};
}

std::vector<std::size_t> ModelConfig::scorer_widths() const {
  if (!scorer_hidden.empty()) return scorer_hidden;
  return {std::max<std::size_t>(embed_dim / 2, 1)};
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidInput("model config: " + msg); };
  if (patch_size == 0 || image_height == 0 || image_width == 0 || channels == 0) fail("dimensions must be positive");
  if (image_height % patch_size || image_width % patch_size) fail("image size must be divisible by patch size");
  if (heads == 0 || embed_dim == 0) fail("heads and embed_dim must be positive");
  if (embed_dim % heads) fail("embed_dim must be divisible by heads");
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) fail("mlp_ratio must be positive");
  if (classifier_widths().size() != 2) fail("classifier head needs exactly two hidden widths (three layers)");
  if (scorer_widths().empty()) fail("scorer head needs at least one hidden width");
  for (auto w : classifier_widths())
    if (w == 0) fail("zero-width classifier layer");
  for (auto w : scorer_widths())
    if (w == 0) fail("zero-width scorer layer");
}

const char* to_string(AttentionSource source) { return source == AttentionSource::kRaw ? "raw" : "rollout"; }

AttentionSource attention_source_from_string(const std::string& name) {
  if (name == "raw") return AttentionSource::kRaw;
  if (name == "rollout") return AttentionSource::kRollout;
  throw InvalidInput("unknown attention source '" + name + "'");
}

Tensor patchify(const Image& image, const ModelConfig& config) {
  if (image.height != config.image_height || image.width != config.image_width || image.channels != config.channels)
    throw InvalidInput("image " + std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                       std::to_string(image.channels) + " does not match model input " +
                       std::to_string(config.image_height) + "x" + std::to_string(config.image_width) + "x" +
                       std::to_string(config.channels));
  const std::size_t p = config.patch_size, c = config.channels;
  Tensor out = Tensor::zeros({config.num_patches(), config.patch_dim()});
  auto v = out.data();
  std::size_t idx = 0;
  for (std::size_t gr = 0; gr < config.grid_rows(); ++gr)
    for (std::size_t gc = 0; gc < config.grid_cols(); ++gc)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x)
          for (std::size_t ch = 0; ch < c; ++ch) v[idx++] = image.at(gr * p + y, gc * p + x, ch);
  return out;
}

VisionEncoder::VisionEncoder(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config_.embed_dim, t = config_.sequence_length();
  patch_proj_ = Linear(config_.patch_dim(), d, rng);
  cls_token_ = Tensor::zeros({1, d}, true);
  for (auto& v : cls_token_.data()) v = rng.truncated_normal(kInitStd);
  if (config_.positional == PositionalEncoding::kLearned) {
    pos_embed_ = Tensor::zeros({t, d}, true);
    for (auto& v : pos_embed_.data()) v = rng.truncated_normal(kInitStd);
  } else {
    pos_embed_ = Tensor::zeros({t, d}, false);
    auto v = pos_embed_.data();
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const double freq = std::pow(10000.0, -static_cast<double>(2 * (k / 2)) / static_cast<double>(d));
        v[i * d + k] = (k % 2 == 0) ? std::sin(static_cast<double>(i) * freq) : std::cos(static_cast<double>(i) * freq);
      }
  }
  blocks_.reserve(config_.depth);
  for (std::size_t l = 0; l < config_.depth; ++l) {
    Block b;
    b.norm1 = LayerNorm(d, config_.layer_norm_eps);
    b.qkv = Linear(d, 3 * d, rng);
    b.proj = Linear(d, d, rng);
    b.norm2 = LayerNorm(d, config_.layer_norm_eps);
    b.fc1 = Linear(d, config_.mlp_hidden(), rng);
    b.fc2 = Linear(config_.mlp_hidden(), d, rng);
    blocks_.push_back(std::move(b));
  }
}

Tensor VisionEncoder::embed(Tape& tape, const Tensor& patches) const {
  if (patches.rows() != config_.num_patches() || patches.cols() != config_.patch_dim())
    throw InvalidInput("patch matrix " + shape_str(patches.shape()) + " does not match model config");
  const Tensor patch_tokens = patch_proj_(tape, patches);
  const Tensor parts[] = {cls_token_, patch_tokens};
  return ops::add(tape, ops::concat_rows(tape, parts), pos_embed_);
}

Tensor VisionEncoder::attention_sublayer(Tape& tape, const Block& block, const Tensor& x, AttentionStack& stack) const {
  const std::size_t d = config_.embed_dim, dh = config_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor qkv = block.qkv(tape, block.norm1(tape, x));
  std::vector<Tensor> head_attn, head_out;
  head_attn.reserve(config_.heads);
  head_out.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const Tensor q = ops::slice_cols(tape, qkv, h * dh, (h + 1) * dh);
    const Tensor k = ops::slice_cols(tape, qkv, d + h * dh, d + (h + 1) * dh);
    const Tensor v = ops::slice_cols(tape, qkv, 2 * d + h * dh, 2 * d + (h + 1) * dh);
    Tensor a = ops::softmax(tape, ops::scale(tape, ops::matmul_nt(tape, q, k), scale), 1);
    head_out.push_back(ops::matmul(tape, a, v));
    head_attn.push_back(std::move(a));
  }
  stack.layers.push_back(ops::average(tape, head_attn));
  stack.per_head.push_back(std::move(head_attn));
  return block.proj(tape, ops::concat_cols(tape, head_out));
}

EncoderOutput VisionEncoder::encode(Tape& tape, const Tensor& tokens) const {
  if (tokens.rows() != config_.sequence_length() || tokens.cols() != config_.embed_dim)
    throw InvalidInput("token sequence " + shape_str(tokens.shape()) + " does not match model config");
  EncoderOutput out;
  Tensor x = tokens;
  for (const auto& block : blocks_) {
    x = ops::add(tape, x, attention_sublayer(tape, block, x, out.attention));
    const Tensor mlp = block.fc2(tape, ops::gelu(tape, block.fc1(tape, block.norm2(tape, x))));
    x = ops::add(tape, x, mlp);
  }
  out.tokens = x;
  return out;
}

void VisionEncoder::collect(const std::string& prefix, ParameterList& out) const {
  patch_proj_.collect(prefix + ".patch_proj", out);
  out.push_back({prefix + ".cls_token", cls_token_});
  if (config_.positional == PositionalEncoding::kLearned) out.push_back({prefix + ".pos_embed", pos_embed_});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = prefix + ".blocks." + std::to_string(l);
    blocks_[l].norm1.collect(p + ".norm1", out);
    blocks_[l].qkv.collect(p + ".attn.qkv", out);
    blocks_[l].proj.collect(p + ".attn.proj", out);
    blocks_[l].norm2.collect(p + ".norm2", out);
    blocks_[l].fc1.collect(p + ".mlp.fc1", out);
    blocks_[l].fc2.collect(p + ".mlp.fc2", out);
  }
}

Tensor cls_descriptor(Tape& tape, const Tensor& tokens) { return ops::slice_rows(tape, tokens, 0, 1); }

namespace {

PatchAttention cls_patch_weights(Tape& tape, const Tensor& matrix_or_row, AttentionSource source) {
  const std::size_t t = matrix_or_row.cols();
  const Tensor cls_row = ops::slice_rows(tape, matrix_or_row, 0, 1);
  const Tensor patches = ops::slice_cols(tape, cls_row, 1, t);
  return {ops::row_normalize(tape, patches), source};
}

Tensor identity(std::size_t n) {
  Tensor eye = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) eye.data()[i * n + i] = 1.0;
  return eye;
}

}  // namespace

PatchAttention raw_attention(Tape& tape, const AttentionStack& stack) {
  if (stack.empty()) throw InvalidInput("raw attention needs at least one encoder layer");
  return cls_patch_weights(tape, stack.layers.back(), AttentionSource::kRaw);
}

Tensor residual_adjusted(Tape& tape, const Tensor& layer_attention) {
  return ops::row_normalize(tape, ops::add(tape, layer_attention, identity(layer_attention.rows())));
}

Tensor rollout_matrix(Tape& tape, const AttentionStack& stack) {
  if (stack.empty()) throw InvalidInput("rollout needs at least one encoder layer");
  Tensor r = residual_adjusted(tape, stack.layers.front());
  for (std::size_t l = 1; l < stack.depth(); ++l) r = ops::matmul(tape, r, residual_adjusted(tape, stack.layers[l]));
  return r;
}

PatchAttention rollout(Tape& tape, const AttentionStack& stack) {
  if (stack.empty()) throw InvalidInput("rollout needs at least one encoder layer");
  // Only the CLS row of R is needed: propagate e₀ᵀ·Ã(1) through the rest.
  Tensor r = ops::slice_rows(tape, residual_adjusted(tape, stack.layers.front()), 0, 1);
  for (std::size_t l = 1; l < stack.depth(); ++l) r = ops::matmul(tape, r, residual_adjusted(tape, stack.layers[l]));
  return cls_patch_weights(tape, r, AttentionSource::kRollout);
}

PatchAttention extract_attention(Tape& tape, const AttentionStack& stack, AttentionSource source) {
  return source == AttentionSource::kRaw ? raw_attention(tape, stack) : rollout(tape, stack);
}

}  // namespace gazevit
