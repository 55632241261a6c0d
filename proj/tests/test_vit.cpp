#include <gtest/gtest.h>

#include <cmath>

#include "gazevit/model.hpp"
#include "gazevit/vit.hpp"
#include "support.hpp"

using namespace gazevit;

namespace {

ModelConfig small_config(std::size_t depth = 2) {
  ModelConfig c;
  c.image_height = 32;
  c.image_width = 32;
  c.patch_size = 8;
  c.depth = depth;
  c.heads = 2;
  c.embed_dim = 16;
  return c;
}

Image random_image(Rng& rng, const ModelConfig& c) {
  Image img(c.image_height, c.image_width, c.channels);
  for (auto& v : img.pixels) v = rng.uniform();
  return img;
}

bool row_stochastic(const Tensor& t, double tol) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (t.at(r, c) < 0) return false;
      s += t.at(r, c);
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

double sum_of(const Tensor& t) {
  double s = 0;
  for (double v : t.data()) s += v;
  return s;
}

// Stack with a single layer holding `rows`.
AttentionStack stack_of(std::vector<std::vector<double>> rows) {
  std::vector<double> flat;
  for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  AttentionStack s;
  s.layers.push_back(Tensor({rows.size(), rows.front().size()}, flat));
  return s;
}

}  // namespace

TEST(ModelConfig, Dimensions) {
  const auto c = small_config();
  EXPECT_EQ(c.num_patches(), 16u);
  EXPECT_EQ(c.sequence_length(), 17u);
  EXPECT_EQ(c.head_dim(), 8u);
  EXPECT_EQ(c.patch_dim(), 192u);
  ModelConfig bad = c;
  bad.patch_size = 7;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = c;
  bad.heads = 3;
  EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(Embed, SequenceLength) {
  const auto c = small_config();
  Rng rng(1);
  VisionEncoder enc(c, rng);
  Tape tape(false);
  const Tensor tokens = enc.embed(tape, random_image(rng, c));
  EXPECT_EQ(tokens.rows(), 17u);
  EXPECT_EQ(tokens.cols(), 16u);
}

TEST(Embed, RejectsWrongSize) {
  const auto c = small_config();
  Rng rng(1);
  VisionEncoder enc(c, rng);
  Tape tape(false);
  Image img(16, 32, 3);
  EXPECT_THROW(enc.embed(tape, img), InvalidInput);
}

TEST(Embed, PatchLocality) {
  const auto c = small_config();
  Rng rng(2);
  VisionEncoder enc(c, rng);
  Image a = random_image(rng, c), b = a;
  // Patch (row 1, col 2) → patch index 6 → token row 7.
  for (std::size_t y = 8; y < 16; ++y)
    for (std::size_t x = 16; x < 24; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) b.pixels[(y * 32 + x) * 3 + ch] = 1.0 - b.pixels[(y * 32 + x) * 3 + ch];
  Tape tape(false);
  const Tensor ta = enc.embed(tape, a), tb = enc.embed(tape, b);
  for (std::size_t r = 0; r < 17; ++r) {
    bool same = true;
    for (std::size_t col = 0; col < 16; ++col) same = same && ta.at(r, col) == tb.at(r, col);
    EXPECT_EQ(same, r != 7) << "row " << r;
  }
}

TEST(Embed, ZeroImageGivesPositionalEmbedding) {
  const auto c = small_config();
  Rng rng(3);
  VisionEncoder enc(c, rng);
  Image zero(32, 32, 3);
  Tape tape(false);
  const Tensor t = enc.embed(tape, zero);
  const Tensor& pos = enc.positional_embedding();
  for (std::size_t r = 1; r < 17; ++r)
    for (std::size_t col = 0; col < 16; ++col) EXPECT_EQ(t.at(r, col), pos.at(r, col));
}

TEST(Embed, PatchifyOrder) {
  ModelConfig c = small_config();
  c.channels = 1;
  Image img(32, 32, 1);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>(i);
  const Tensor p = patchify(img, c);
  ASSERT_EQ(p.rows(), 16u);
  ASSERT_EQ(p.cols(), 64u);
  // Patch 5 = grid (1, 1): top-left pixel (8, 8); element 9 = (y 1, x 1).
  EXPECT_EQ(p.at(5, 0), 8.0 * 32 + 8);
  EXPECT_EQ(p.at(5, 9), 9.0 * 32 + 9);
}

TEST(Encode, AttentionRowsAreStochastic) {
  const auto c = small_config(3);
  Rng rng(4);
  SiameseModel model(c, 5);
  Tape tape(false);
  const auto out = model.encode(tape, patchify(random_image(rng, c), c));
  ASSERT_EQ(out.attention.depth(), 3u);
  for (const auto& a : out.attention.layers) {
    EXPECT_EQ(a.rows(), 17u);
    EXPECT_TRUE(row_stochastic(a, 1e-9));
  }
}

TEST(Encode, DepthZeroIsIdentity) {
  const auto c = small_config(0);
  Rng rng(6);
  VisionEncoder enc(c, rng);
  Tape tape(false);
  const Tensor tokens = enc.embed(tape, random_image(rng, c));
  const auto out = enc.encode(tape, tokens);
  EXPECT_TRUE(out.attention.empty());
  ASSERT_EQ(out.tokens.numel(), tokens.numel());
  for (std::size_t i = 0; i < tokens.numel(); ++i) EXPECT_EQ(out.tokens.data()[i], tokens.data()[i]);
  const Tensor h = cls_descriptor(tape, out.tokens);
  for (std::size_t col = 0; col < 16; ++col) EXPECT_EQ(h.at(0, col), tokens.at(0, col));
  EXPECT_THROW(raw_attention(tape, out.attention), InvalidInput);
  EXPECT_THROW(rollout(tape, out.attention), InvalidInput);
}

TEST(Encode, PermutationEquivariance) {
  const auto c = small_config(2);
  Rng rng(7);
  VisionEncoder enc(c, rng);
  Tape tape(false);
  const Tensor tokens = enc.embed(tape, random_image(rng, c));
  // Swapping token rows i and j (patch content and its positional embedding
  // together) must swap rows and columns i, j of the first-layer attention.
  const std::size_t i = 3, j = 11;
  Tensor swapped = tokens.clone();
  for (std::size_t col = 0; col < 16; ++col) std::swap(swapped.at(i, col), swapped.at(j, col));
  const auto a = enc.encode(tape, tokens).attention.layers[0];
  const auto b = enc.encode(tape, swapped).attention.layers[0];
  auto perm = [&](std::size_t k) { return k == i ? j : k == j ? i : k; };
  for (std::size_t r = 0; r < 17; ++r)
    for (std::size_t col = 0; col < 17; ++col) EXPECT_NEAR(b.at(r, col), a.at(perm(r), perm(col)), 1e-12);
}

TEST(ClsDescriptor, SharedWeightsAndPerturbation) {
  const auto c = small_config(2);
  Rng rng(8);
  SiameseModel model(c, 9);
  const Image img = random_image(rng, c);
  Tape tape(false);
  const auto out = model.forward(tape, img, img);
  for (std::size_t col = 0; col < 16; ++col) EXPECT_EQ(out.h_left.at(0, col), out.h_right.at(0, col));
  EXPECT_EQ(out.score_left.item(), out.score_right.item());

  // Changing any single patch changes the descriptor.
  const Tensor base = out.h_left;
  for (std::size_t p = 0; p < c.num_patches(); ++p) {
    Image changed = img;
    const std::size_t py = (p / 4) * 8, px = (p % 4) * 8;
    changed.pixels[(py * 32 + px) * 3] += 0.5;
    const auto o2 = model.forward(tape, changed, img);
    double diff = 0;
    for (std::size_t col = 0; col < 16; ++col) diff += std::abs(o2.h_left.at(0, col) - base.at(0, col));
    EXPECT_GT(diff, 0.0) << "patch " << p;
  }
}

TEST(SiameseContract, SwapSwapsDescriptors) {
  const auto c = small_config(2);
  Rng rng(10);
  SiameseModel model(c, 11);
  const Image a = random_image(rng, c), b = random_image(rng, c);
  Tape tape(false);
  const auto ab = model.forward(tape, a, b), ba = model.forward(tape, b, a);
  for (std::size_t col = 0; col < 16; ++col) {
    EXPECT_EQ(ab.h_left.at(0, col), ba.h_right.at(0, col));
    EXPECT_EQ(ab.h_right.at(0, col), ba.h_left.at(0, col));
  }
  EXPECT_EQ(ab.score_left.item(), ba.score_right.item());
}

TEST(RawAttention, Examples) {
  Tape tape(false);
  auto s = stack_of({{0.2, 0.4, 0.4}, {0.3, 0.3, 0.4}, {0.1, 0.1, 0.8}});
  const auto m = raw_attention(tape, s);
  EXPECT_NEAR(m.weights.at(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(m.weights.at(0, 1), 0.5, 1e-12);
  EXPECT_EQ(m.source, AttentionSource::kRaw);

  std::vector<std::vector<double>> uniform(5, std::vector<double>(5, 0.2));
  const auto u = raw_attention(tape, stack_of(uniform));
  for (double v : u.weights.data()) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(Rollout, HandMultipliedTwoByTwo) {
  Tape tape(false);
  auto s = stack_of({{0.6, 0.4}, {0.3, 0.7}});
  const Tensor adj = residual_adjusted(tape, s.layers[0]);
  EXPECT_NEAR(adj.at(0, 0), 0.8, 1e-12);
  EXPECT_NEAR(adj.at(0, 1), 0.2, 1e-12);
  EXPECT_NEAR(adj.at(1, 0), 0.15, 1e-12);
  EXPECT_NEAR(adj.at(1, 1), 0.85, 1e-12);
  const auto m = rollout(tape, s);
  ASSERT_EQ(m.weights.numel(), 1u);
  EXPECT_NEAR(m.weights.item(), 1.0, 1e-12);
  EXPECT_EQ(m.source, AttentionSource::kRollout);
}

TEST(Rollout, UniformLayersGiveUniformMap) {
  Tape tape(false);
  AttentionStack s;
  for (int l = 0; l < 3; ++l) s.layers.push_back(Tensor::full({6, 6}, 1.0 / 6.0));
  const auto m = rollout(tape, s);
  for (double v : m.weights.data()) EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(Rollout, MatchesExplicitProduct) {
  const auto c = small_config(3);
  Rng rng(12);
  SiameseModel model(c, 13);
  Tape tape(false);
  const auto out = model.encode(tape, patchify(random_image(rng, c), c));
  // Explicit R = Ã1·Ã2·Ã3 with Ã = (Ā + I) / rowsum, computed directly.
  const std::size_t n = 17;
  std::vector<double> R(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) R[i * n + i] = 1.0;
  for (const auto& a : out.attention.layers) {
    std::vector<double> adj(n * n), next(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += adj[i * n + j] = a.at(i, j) + (i == j ? 1.0 : 0.0);
      for (std::size_t j = 0; j < n; ++j) adj[i * n + j] /= s;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) next[i * n + j] += R[i * n + k] * adj[k * n + j];
    R = next;
  }
  const Tensor full = rollout_matrix(tape, out.attention);
  EXPECT_TRUE(row_stochastic(full, 1e-9));
  double mass = 0;
  for (std::size_t j = 1; j < n; ++j) mass += R[j];
  const auto m = rollout(tape, out.attention);
  for (std::size_t j = 1; j < n; ++j) {
    EXPECT_NEAR(full.at(0, j), R[j], 1e-12);
    EXPECT_NEAR(m.weights.at(0, j - 1), R[j] / mass, 1e-12);
  }
}

TEST(AttentionMaps, SumToOneOnRandomStacks) {
  Rng rng(14);
  Tape tape(false);
  for (int trial = 0; trial < 100; ++trial) {
    AttentionStack s;
    const std::size_t n = 2 + rng.below(10);
    for (std::size_t l = 0, L = 1 + rng.below(4); l < L; ++l) {
      Tensor a = Tensor::zeros({n, n});
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = gazevit::testing::random_distribution(rng, n);
        for (std::size_t col = 0; col < n; ++col) a.at(r, col) = row[col];
      }
      s.layers.push_back(a);
    }
    EXPECT_NEAR(sum_of(raw_attention(tape, s).weights), 1.0, 1e-12);
    EXPECT_NEAR(sum_of(rollout(tape, s).weights), 1.0, 1e-12);
    for (const auto& a : s.layers) EXPECT_TRUE(row_stochastic(residual_adjusted(tape, a), 1e-9));
    EXPECT_TRUE(row_stochastic(rollout_matrix(tape, s), 1e-9));
  }
}

TEST(AttentionSource, Names) {
  EXPECT_STREQ(to_string(AttentionSource::kRaw), "raw");
  EXPECT_EQ(attention_source_from_string("rollout"), AttentionSource::kRollout);
  EXPECT_THROW(attention_source_from_string("both"), InvalidInput);
}

TEST(Positional, SinusoidalIsConstant) {
  ModelConfig c = small_config(1);
  c.positional = PositionalEncoding::kSinusoidal;
  SiameseModel model(c, 15);
  for (const auto& p : model.parameters()) EXPECT_EQ(p.name.find("pos_embed"), std::string::npos);
  const Tensor& pos = model.encoder().positional_embedding();
  EXPECT_EQ(pos.rows(), 17u);
  EXPECT_FALSE(pos.requires_grad());
  EXPECT_NEAR(pos.at(1, 0), std::sin(1.0), 1e-12);
  EXPECT_NEAR(pos.at(1, 1), std::cos(1.0), 1e-12);
  EXPECT_NEAR(pos.at(2, 2), std::sin(2.0 * std::pow(10000.0, -2.0 / 16.0)), 1e-12);
}
