#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>
#include <unistd.h>

#include "gazevit/config.hpp"
#include "gazevit/train.hpp"
#include "support.hpp"

using namespace gazevit;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.image_height = c.image_width = 16;
  c.patch_size = 8;
  c.depth = 2;
  c.heads = 2;
  c.embed_dim = 8;
  return c;
}

// In-memory pairs with random patches; every other pair carries gaze.
std::vector<PreparedPair> random_pairs(const ModelConfig& mc, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PreparedPair> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = out[i];
    p.record.pair_id = "r" + std::to_string(i);
    p.record.y = i % 2 ? Label::kRightSafer : Label::kLeftSafer;
    p.left = gazevit::testing::random_tensor(rng, {mc.num_patches(), mc.patch_dim()}, 0.5, false);
    p.right = gazevit::testing::random_tensor(rng, {mc.num_patches(), mc.patch_dim()}, 0.5, false);
    if (i % 2 == 0) {
      p.record.has_gaze = true;
      p.gaze_left = SideGaze{gazevit::testing::random_distribution(rng, mc.num_patches()), {}, {}};
      p.gaze_right = SideGaze{gazevit::testing::random_distribution(rng, mc.num_patches()), {}, {}};
    }
  }
  return out;
}

std::vector<std::vector<double>> snapshot(const SiameseModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

TrainConfig short_run() {
  TrainConfig c;
  c.batch_size = 4;
  c.max_epochs = 3;
  c.patience = 0;
  c.optimizer.lr = 1e-2;
  c.seed = 7;
  return c;
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("gazevit_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Schedule, WarmupThenCosine) {
  AdamWConfig opt;
  opt.lr = 1.0;
  ScheduleConfig s;
  s.warmup_frac = 0.1;
  s.min_lr = 0.0;
  EXPECT_DOUBLE_EQ(scheduled_lr(opt, s, 0, 100), 0.1);
  EXPECT_DOUBLE_EQ(scheduled_lr(opt, s, 9, 100), 1.0);
  EXPECT_DOUBLE_EQ(scheduled_lr(opt, s, 10, 100), 1.0);
  EXPECT_NEAR(scheduled_lr(opt, s, 55, 100), 0.5, 1e-12);
  EXPECT_NEAR(scheduled_lr(opt, s, 100, 100), 0.0, 1e-12);
  for (std::size_t k = 10; k < 100; ++k) EXPECT_LE(scheduled_lr(opt, s, k + 1, 100), scheduled_lr(opt, s, k, 100));
}

TEST(Schedule, MinLrFloor) {
  AdamWConfig opt;
  ScheduleConfig s;
  EXPECT_NEAR(scheduled_lr(opt, s, 1000, 1000), s.min_lr, 1e-15);
  s.warmup_frac = 0.0;
  EXPECT_DOUBLE_EQ(scheduled_lr(opt, s, 0, 1000), opt.lr);
}

TEST(AdamW, FirstStepMatchesClosedForm) {
  Tensor w = Tensor::zeros({2, 2}, true), b = Tensor::zeros({1, 2}, true);
  for (std::size_t i = 0; i < 4; ++i) w.data()[i] = 0.5 + i;
  const std::vector<double> gw{0.1, -2.0, 0.0, 3.0}, gb{-0.5, 0.25};
  std::ranges::copy(gw, w.grad().begin());
  std::ranges::copy(gb, b.grad().begin());
  AdamWConfig cfg;
  cfg.weight_decay = 0.1;
  AdamW opt({{"x.weight", w}, {"x.bias", b}}, cfg);
  const double lr = 0.01;
  opt.step(lr);
  // Bias-corrected moments of the first step are g and g².
  for (std::size_t i = 0; i < 4; ++i) {
    const double g = gw[i];
    const double expect = (0.5 + i) * (1 - lr * 0.1) - lr * g / (std::abs(g) + cfg.eps);
    EXPECT_NEAR(w.data()[i], expect, 1e-15);
  }
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(b.data()[i], -lr * gb[i] / (std::abs(gb[i]) + cfg.eps), 1e-15);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = {};
  c.optimizer.lr = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = {};
  c.schedule.warmup_frac = 1.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  EXPECT_EQ(attention_mode_from_string("rollout"), AttentionMode::kRollout);
  EXPECT_THROW(attention_mode_from_string("both"), InvalidInput);
}

TEST(Config, RoundTripAndStrictKeys) {
  ExperimentConfig c;
  c.model = tiny();
  c.train.batch_size = 16;
  c.train.attention = AttentionMode::kRollout;
  c.train.optimizer.lr = 1e-3;
  c.gaze.sigma_px = 12.5;
  c.metrics.kl_base = LogBase::kTwo;
  ExperimentConfig d;
  from_json(to_json(c), d);
  EXPECT_EQ(to_json(d).dump(), to_json(c).dump());
  EXPECT_EQ(d.train.attention, AttentionMode::kRollout);
  EXPECT_EQ(d.model.embed_dim, 8u);

  ExperimentConfig e;
  EXPECT_THROW(from_json(Json::parse(R"({"train": {"batchsize": 4}})"), e), InvalidInput);
  EXPECT_THROW(from_json(Json::parse(R"({"modle": {}})"), e), InvalidInput);
  EXPECT_THROW(from_json(Json::parse(R"({"model": {"embed_dim": 7}})"), e), InvalidInput);
  EXPECT_THROW(from_json(Json::parse(R"({"train": {"optimizer": {"lr": "fast"}}})"), e), InvalidInput);
  ExperimentConfig partial;
  from_json(Json::parse(R"({"train": {"lambda_gaze": 0.5}})"), partial);
  EXPECT_EQ(partial.train.weights.gaze, 0.5);
  EXPECT_EQ(partial.train.batch_size, 128u);
}

TEST(Config, CheckpointRoundTrip) {
  const fs::path dir = temp_dir("ckpt");
  SiameseModel m(tiny(), 3);
  save_checkpoint(m, dir / "a");
  SiameseModel back = load_checkpoint(dir / "a");
  EXPECT_EQ(snapshot(back), snapshot(m));
  save_checkpoint(back, dir / "b");
  EXPECT_EQ(slurp(dir / "a" / "params.egpc"), slurp(dir / "b" / "params.egpc"));
  EXPECT_EQ(slurp(dir / "a" / "config.json"), slurp(dir / "b" / "config.json"));
  fs::remove_all(dir);
}

TEST(Training, SameSeedIsBitIdentical) {
  const ModelConfig mc = tiny();
  const auto train = random_pairs(mc, 10, 1), val = random_pairs(mc, 4, 2);
  SiameseModel a(mc, 11), b(mc, 11);
  const TrainResult ra = train_model(a, train, val, short_run());
  const TrainResult rb = train_model(b, train, val, short_run());
  EXPECT_EQ(snapshot(a), snapshot(b));
  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].to_json().dump(), rb.log[i].to_json().dump());
}

TEST(Training, ZeroGazeWeightMatchesNoAttentionBranch) {
  const ModelConfig mc = tiny();
  const auto train = random_pairs(mc, 10, 3);
  TrainConfig zero = short_run();
  zero.weights.gaze = 0.0;
  TrainConfig none = short_run();
  none.attention = AttentionMode::kNone;
  SiameseModel a(mc, 5), b(mc, 5), c(mc, 5);
  train_model(a, train, {}, zero);
  train_model(b, train, {}, none);
  EXPECT_EQ(snapshot(a), snapshot(b));
  train_model(c, train, {}, short_run());
  EXPECT_NE(snapshot(a), snapshot(c));
}

TEST(Training, LossDecreasesAndLogIsComplete) {
  const ModelConfig mc = tiny();
  const auto train = random_pairs(mc, 12, 4);
  TrainConfig cfg = short_run();
  cfg.max_epochs = 20;
  cfg.track_train_accuracy = true;
  SiameseModel m(mc, 1);
  std::size_t callbacks = 0;
  const double before = mean_pair_loss(m, train, cfg);
  const TrainResult r = train_model(m, train, {}, cfg, [&](const EpochRecord&) { ++callbacks; });
  EXPECT_EQ(callbacks, r.log.size());
  EXPECT_EQ(r.log.size(), 20u);
  EXPECT_LT(mean_pair_loss(m, train, cfg), before);
  const auto j = r.log.back().to_json();
  EXPECT_TRUE(j.contains("train_class_accuracy"));
  EXPECT_FALSE(j.contains("val_loss"));
  EXPECT_GT(r.log.back().train_attn, 0.0);
}

TEST(Training, EarlyStopsAndRestoresBest) {
  const ModelConfig mc = tiny();
  const auto train = random_pairs(mc, 8, 5);
  auto val = random_pairs(mc, 8, 6);
  for (auto& p : val) p.record.y = label_from_int(-to_int(p.record.y));  // fight the training signal
  TrainConfig cfg = short_run();
  cfg.max_epochs = 40;
  cfg.patience = 2;
  SiameseModel m(mc, 2);
  const TrainResult r = train_model(m, train, val, cfg);
  ASSERT_TRUE(r.best_val_loss.has_value());
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.log.size(), r.best_epoch + 2);
  EXPECT_NEAR(mean_pair_loss(m, val, cfg), *r.best_val_loss, 1e-12);
}

TEST(Training, NonFiniteLossAbortsWithState) {
  const ModelConfig mc = tiny();
  auto train = random_pairs(mc, 4, 7);
  train[2].left.data()[0] = std::numeric_limits<double>::quiet_NaN();
  SiameseModel m(mc, 1);
  try {
    train_model(m, train, {}, short_run());
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.state().at("pair_id"), "r2");
    EXPECT_EQ(e.state().at("epoch"), 1);
    EXPECT_TRUE(e.state().contains("lr"));
  }
}

TEST(Training, EmptyTrainSetRejected) {
  SiameseModel m(tiny(), 1);
  EXPECT_THROW(train_model(m, {}, {}, short_run()), InvalidInput);
}

TEST(Evaluate, TiesCountAsErrors) {
  const ModelConfig mc = tiny();
  SiameseModel m(mc, 1);
  for (auto& p : m.parameters()) std::ranges::fill(p.tensor.data(), 0.0);
  const EvalResult r = evaluate(m, random_pairs(mc, 6, 8));
  EXPECT_EQ(r.class_accuracy, 0.0);
  EXPECT_EQ(r.rank_accuracy, 0.0);
  for (const auto& p : r.predictions) {
    EXPECT_EQ(p.p_left, p.p_right);
    EXPECT_EQ(p.s_left, p.s_right);
  }
}

TEST(Evaluate, AccuracyDefinitionsAndPurity) {
  const ModelConfig mc = tiny();
  SiameseModel m(mc, 9);
  const auto pairs = random_pairs(mc, 40, 9);
  const EvalResult a = evaluate(m, pairs), b = evaluate(m, pairs);
  std::size_t cls = 0, rank = 0;
  for (const auto& p : a.predictions) {
    const int y = to_int(p.y);
    cls += (y == 1 ? p.p_right > p.p_left : p.p_left > p.p_right);
    rank += (y * (p.s_right - p.s_left) > 0);
  }
  EXPECT_DOUBLE_EQ(a.class_accuracy, cls / 40.0);
  EXPECT_DOUBLE_EQ(a.rank_accuracy, rank / 40.0);
  const fs::path dir = temp_dir("eval");
  write_predictions_csv(a, dir / "a.csv");
  write_predictions_csv(b, dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  fs::remove_all(dir);
  EXPECT_THROW(evaluate(m, {}), InvalidInput);
}

TEST(MeanCI, StudentT) {
  const MeanCI ci = mean_ci95({1.0, 2.0, 3.0, 4.0, 5.0});
  EXPECT_DOUBLE_EQ(ci.mean, 3.0);
  // t(0.975, 4) = 2.7764451; sd = sqrt(2.5)
  EXPECT_NEAR(ci.half_width, 2.7764451051977934 * std::sqrt(2.5) / std::sqrt(5.0), 1e-9);
  EXPECT_TRUE(std::isnan(mean_ci95({1.0}).half_width));
}
