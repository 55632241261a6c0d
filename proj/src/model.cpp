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
#include "gazevit/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace gazevit {

SiameseModel::SiameseModel(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  encoder_ = VisionEncoder(config, rng);
  classifier_ = ClassificationHead(config.embed_dim, config.classifier_widths(), rng);
  scorer_ = ScoreHead(config.embed_dim, config.scorer_widths(), rng);
}

EncoderOutput SiameseModel::encode(Tape& tape, const Tensor& patches) const {
  return encoder_.encode(tape, encoder_.embed(tape, patches));
}

PairOutput SiameseModel::forward(Tape& tape, const Tensor& left_patches, const Tensor& right_patches) const {
  EncoderOutput left = encode(tape, left_patches);
  EncoderOutput right = encode(tape, right_patches);
  PairOutput out;
  out.h_left = cls_descriptor(tape, left.tokens);
  out.h_right = cls_descriptor(tape, right.tokens);
  out.probs = classifier_(tape, out.h_left, out.h_right);
  out.score_left = scorer_(tape, out.h_left);
  out.score_right = scorer_(tape, out.h_right);
  out.attn_left = std::move(left.attention);
  out.attn_right = std::move(right.attention);
  return out;
}

PairOutput SiameseModel::forward(Tape& tape, const Image& left, const Image& right) const {
  return forward(tape, patchify(left, config()), patchify(right, config()));
}

ParameterList SiameseModel::parameters() const {
  ParameterList out;
  encoder_.collect("encoder", out);
  classifier_.collect("classifier", out);
  scorer_.collect("scorer", out);
  return out;
}

void SiameseModel::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

void SiameseModel::load_parameters(const ParameterList& source) {
  auto mine = parameters();
  if (mine.size() != source.size())
    throw InvalidInput("parameter count mismatch: model has " + std::to_string(mine.size()) + ", source has " +
                       std::to_string(source.size()));
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].name != source[i].name || mine[i].tensor.shape() != source[i].tensor.shape())
      throw InvalidInput("parameter mismatch at '" + mine[i].name + "' (source '" + source[i].name + "' " +
                         shape_str(source[i].tensor.shape()) + ")");
    std::ranges::copy(source[i].tensor.data(), mine[i].tensor.data().begin());
  }
}

SiameseModel SiameseModel::clone() const {
  SiameseModel copy(config(), 0);
  copy.load_parameters(parameters());
  return copy;
}

PairLoss pair_loss(Tape& tape, const PairOutput& out, Label y, const GazeTargets* gaze, const LossWeights& weights,
                   std::optional<AttentionSource> source) {
  PairLoss loss;
  loss.cls = loss_cls(tape, out.probs, y);
  loss.rank = loss_rank(tape, out.score_left, out.score_right, y, weights.margin);
  const bool has_gaze = gaze != nullptr && source.has_value();
  if (has_gaze) {
    const PatchAttention m_left = extract_attention(tape, out.attn_left, *source);
    const PatchAttention m_right = extract_attention(tape, out.attn_right, *source);
    loss.attn = loss_attn(tape, m_left.weights, m_right.weights, gaze->left, gaze->right);
  }
  loss.total = total_loss(tape, loss.cls, loss.rank, loss.attn, weights, has_gaze);
  return loss;
}

namespace {

constexpr char kParamMagic[4] = {'E', 'G', 'P', 'C'};
constexpr std::uint32_t kParamVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated parameter blob");
  return v;
}

}  // namespace

void save_parameters(const ParameterList& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kParamMagic, 4);
  put<std::uint32_t>(out, kParamVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(out, d);
    const auto data = p.tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ParameterList read_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kParamMagic, 4) != 0) throw std::runtime_error(path.string() + ": not an EGPC blob");
  const auto version = get<std::uint32_t>(in);
  if (version != kParamVersion) throw std::runtime_error(path.string() + ": unsupported EGPC version");
  const auto count = get<std::uint32_t>(in);
  ParameterList out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = get<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    std::vector<double> values(numel_of(shape));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + ": truncated array '" + name + "'");
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return out;
}

}  // namespace gazevit
