#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>
#include <unistd.h>

#include "gazevit/bench.hpp"
#include "gazevit/csv.hpp"
#include "gazevit/image.hpp"
#include "gazevit/synth.hpp"

using namespace gazevit;
namespace fs = std::filesystem;

namespace {

ModelConfig small() {
  ModelConfig c;
  c.image_height = c.image_width = 32;
  c.patch_size = 8;
  c.depth = 2;
  c.heads = 2;
  c.embed_dim = 16;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class SynthFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / ("gazevit_bench_" + std::to_string(::getpid())));
    fs::remove_all(*dir_);
    SynthConfig sc;
    sc.pairs = 12;
    sc.gaze_fraction = 0.5;
    sc.seed = 21;
    data_ = new SynthDataset(generate_planted_target(*dir_ / "data", sc));
    pairs_ = new std::vector<PreparedPair>(prepare_pairs(data_->records, small(), GazeConfig{}));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete pairs_;
    delete data_;
    delete dir_;
  }

  static fs::path* dir_;
  static SynthDataset* data_;
  static std::vector<PreparedPair>* pairs_;
};
fs::path* SynthFixture::dir_ = nullptr;
SynthDataset* SynthFixture::data_ = nullptr;
std::vector<PreparedPair>* SynthFixture::pairs_ = nullptr;

// Stub that returns the gaze distribution itself as the model map.
std::vector<double> gaze_as_attention(const PreparedPair& p, Side side, AttentionSource) {
  return side == Side::kLeft ? p.gaze_left->distribution : p.gaze_right->distribution;
}

}  // namespace

TEST_F(SynthFixture, ManifestLoadsCleanAndBalanced) {
  const Dataset ds = load_dataset(data_->manifest);
  EXPECT_EQ(ds.records.size(), 12u);
  EXPECT_TRUE(ds.report.issues.empty());
  EXPECT_TRUE(ds.report.warnings.empty());
  EXPECT_EQ(ds.report.with_gaze, 6u);
  int sum = 0;
  for (const auto& r : ds.records) sum += to_int(r.y);
  EXPECT_EQ(sum, 0);
}

TEST_F(SynthFixture, BrightObjectIsOnTheSaferSide) {
  for (std::size_t i = 0; i < data_->records.size(); ++i) {
    const auto& r = data_->records[i];
    const Image l = load_image(r.left_image), rr = load_image(r.right_image);
    const auto [cl, cr] = data_->objects[i];
    const double lv = l.at((cl / 4) * 8 + 3, (cl % 4) * 8 + 3, 1);
    const double rv = rr.at((cr / 4) * 8 + 3, (cr % 4) * 8 + 3, 1);
    if (r.y == Label::kLeftSafer) {
      EXPECT_EQ(lv, 1.0);
      EXPECT_LT(rv, 0.5);
    } else {
      EXPECT_EQ(rv, 1.0);
      EXPECT_LT(lv, 0.5);
    }
  }
}

TEST_F(SynthFixture, GazePeaksOnTheObject) {
  std::size_t with_gaze = 0;
  for (std::size_t i = 0; i < pairs_->size(); ++i) {
    const auto& p = (*pairs_)[i];
    EXPECT_EQ(p.has_gaze(), p.record.has_gaze);
    if (!p.has_gaze()) continue;
    ++with_gaze;
    const auto& gl = p.gaze_left->distribution;
    const auto& gr = p.gaze_right->distribution;
    EXPECT_EQ(static_cast<std::size_t>(std::ranges::max_element(gl) - gl.begin()), data_->objects[i].first);
    EXPECT_EQ(static_cast<std::size_t>(std::ranges::max_element(gr) - gr.begin()), data_->objects[i].second);
    EXPECT_EQ(p.gaze_left->fixation_points.values[data_->objects[i].first], 1.0);
  }
  EXPECT_EQ(with_gaze, 6u);
}

TEST_F(SynthFixture, GenerationIsDeterministic) {
  SynthConfig sc;
  sc.pairs = 12;
  sc.gaze_fraction = 0.5;
  sc.seed = 21;
  const auto again = generate_planted_target(*dir_ / "again", sc);
  for (std::size_t i = 0; i < again.records.size(); ++i) {
    EXPECT_EQ(slurp(again.records[i].left_image), slurp(data_->records[i].left_image));
    if (again.records[i].has_gaze) EXPECT_EQ(slurp(again.records[i].left_gaze), slurp(data_->records[i].left_gaze));
  }
  EXPECT_EQ(slurp(again.manifest), slurp(data_->manifest));
}

TEST_F(SynthFixture, AttentionEqualToGazeIsPerfect) {
  BenchOptions o;
  o.source = BenchSource::kRaw;
  const MetricReport r = benchmark_maps(*pairs_, small(), gaze_as_attention, o);
  EXPECT_EQ(r.rows.size(), 12u);  // 6 gaze pairs × 2 sides
  EXPECT_EQ(r.skipped.size(), 6u);
  EXPECT_NEAR(r.mean.cc, 1.0, 1e-12);
  EXPECT_NEAR(r.mean.sim, 1.0, 1e-12);
  EXPECT_NEAR(r.mean.emd, 0.0, 1e-9);
  EXPECT_NEAR(r.mean.kl, 0.0, 1e-6);
  for (const auto& s : r.chosen_source) EXPECT_EQ(s, "raw");
}

TEST_F(SynthFixture, AggregateIsMeanOfCsvRows) {
  SiameseModel model(small(), 4);
  BenchOptions o;
  const MetricReport r = benchmark_attention(model, *pairs_, o);
  const fs::path csv_path = *dir_ / "report.csv";
  write_metric_csv(r, csv_path);
  std::ifstream in(csv_path);
  std::string line;
  std::getline(in, line);
  std::array<std::array<double, 7>, 2> sums{};
  std::array<int, 2> counts{};
  while (std::getline(in, line)) {
    const auto f = csv::split(line);
    const int s = f[3] == "raw" ? 0 : 1;
    ++counts[s];
    for (int k = 0; k < 7; ++k) sums[s][k] += *csv::parse_double(f[4 + k]);
  }
  EXPECT_EQ(counts[0], 12);
  EXPECT_EQ(counts[1], 12);
  for (std::size_t k = 0; k < 7; ++k) {
    const int s = r.chosen_source[k] == "raw" ? 0 : 1;
    EXPECT_NEAR(r.mean.get(kAllMetrics[k]), sums[s][k] / counts[s], 1e-12) << metric_name(kAllMetrics[k]);
  }
}

TEST_F(SynthFixture, NeedsGazePairs) {
  std::vector<PreparedPair> none;
  for (const auto& p : *pairs_)
    if (!p.has_gaze()) none.push_back(p);
  SiameseModel model(small(), 4);
  EXPECT_THROW(benchmark_attention(model, none, {}), InvalidInput);
}

TEST_F(SynthFixture, PixelModeKeepsPatchEmd) {
  SiameseModel model(small(), 4);
  BenchOptions patch, pixel;
  patch.source = pixel.source = BenchSource::kRollout;
  pixel.pixel_mode = true;
  const MetricReport a = benchmark_attention(model, *pairs_, patch);
  const MetricReport b = benchmark_attention(model, *pairs_, pixel);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_NEAR(a.rows[i].values.emd, b.rows[i].values.emd, 1e-12);
    EXPECT_GE(b.rows[i].values.auc, 0.0);
    EXPECT_LE(b.rows[i].values.auc, 1.0);
    EXPECT_LE(std::abs(b.rows[i].values.cc), 1.0 + 1e-12);
  }
}

TEST(Heatmap, UniformMapIsFlat) {
  const std::vector<double> uniform(16, 1.0 / 16);
  const Image h = render_heatmap(uniform, 4, 4, 37, 53);
  EXPECT_EQ(h.height, 37u);
  EXPECT_EQ(h.width, 53u);
  for (std::size_t i = 0; i < h.height * h.width; ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(h.pixels[i * 3 + c], h.pixels[c]);
}

TEST(Heatmap, PeakIsHot) {
  std::vector<double> m(16, 0.0);
  m[5] = 1.0;
  const Image h = render_heatmap(m, 4, 4, 32, 32);
  // JET: the peak is red, empty cells blue.
  EXPECT_GT(h.at(12, 12, 0), 0.45);
  EXPECT_LT(h.at(12, 12, 2), 0.1);
  EXPECT_GT(h.at(31, 31, 2), 0.45);
  EXPECT_THROW(render_heatmap(m, 3, 4, 8, 8), InvalidInput);
}

TEST(Blend, Weights) {
  const Image a(2, 2, 3, 0.2), b(2, 2, 3, 1.0);
  const Image c = blend(a, b, 0.25);
  for (double v : c.pixels) EXPECT_NEAR(v, 0.4, 1e-15);
  EXPECT_THROW(blend(a, Image(3, 2, 3), 0.5), InvalidInput);
}

TEST_F(SynthFixture, OverlaysMatchSourceSizeAndAreReproducible) {
  SiameseModel model(small(), 4);
  std::vector<std::string> ids{data_->records[0].pair_id, data_->records[1].pair_id, "missing"};
  const OverlayResult a = export_overlays(model, data_->records, ids, *dir_ / "ov1");
  const OverlayResult b = export_overlays(model, data_->records, ids, *dir_ / "ov2");
  ASSERT_EQ(a.skipped.size(), 1u);
  EXPECT_NE(a.skipped[0].find("missing"), std::string::npos);
  std::size_t expected = 0;
  for (int i = 0; i < 2; ++i) expected += data_->records[i].has_gaze ? 6 : 4;
  ASSERT_EQ(a.written.size(), expected);
  for (std::size_t i = 0; i < a.written.size(); ++i) {
    EXPECT_EQ(a.written[i].filename(), b.written[i].filename());
    EXPECT_EQ(slurp(a.written[i]), slurp(b.written[i]));
    const Image img = load_image(a.written[i]);
    EXPECT_EQ(img.height, 32u);
    EXPECT_EQ(img.width, 32u);
  }
}
