#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include <gtest/gtest.h>

#include "gazevit/dataset.hpp"
#include "gazevit/image.hpp"
#include "gazevit/random.hpp"

using namespace gazevit;
namespace fs = std::filesystem;

namespace {

class ManifestFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("gazevit_ds_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "img");
    for (int i = 0; i < 4; ++i) save_png(Image(8, 8, 3, 0.1 * i), dir_ / "img" / ("i" + std::to_string(i) + ".png"));
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::vector<std::string>& rows, bool header = true) {
    const fs::path p = dir_ / "manifest.csv";
    std::ofstream out(p);
    if (header) out << kManifestHeader << '\n';
    for (const auto& r : rows) out << r << '\n';
    return p;
  }
  static std::string row(int id, int label) {
    return "p" + std::to_string(id) + ",img/i" + std::to_string(id % 4) + ".png,img/i" + std::to_string((id + 1) % 4) +
           ".png," + std::to_string(label) + ",r1,0,,";
  }

  fs::path dir_;
};

std::vector<ComparisonRecord> fake_records(std::size_t n) {
  std::vector<ComparisonRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].pair_id = "q" + std::to_string(i);
  return out;
}

}  // namespace

TEST_F(ManifestFixture, TieRowIsRejectedAndCounted) {
  std::vector<std::string> rows;
  for (int i = 0; i < 10; ++i) rows.push_back(row(i, i == 4 ? 0 : (i % 2 ? 1 : -1)));
  const Dataset ds = load_dataset(write(rows));
  EXPECT_EQ(ds.records.size(), 9u);
  EXPECT_EQ(ds.report.ties, 1u);
  EXPECT_EQ(ds.report.malformed, 0u);
  ASSERT_EQ(ds.report.issues.size(), 1u);
  EXPECT_EQ(ds.report.issues[0].pair_id, "p4");
  EXPECT_EQ(ds.report.issues[0].line, 6u);
  for (const auto& r : ds.records) EXPECT_NE(r.pair_id, "p4");
}

TEST_F(ManifestFixture, RecordsResolveRelativeToManifest) {
  const Dataset ds = load_dataset(write({row(1, -1), row(2, 1)}));
  ASSERT_EQ(ds.records.size(), 2u);
  EXPECT_TRUE(ds.records[0].left_image.is_absolute());
  EXPECT_TRUE(fs::exists(ds.records[0].left_image));
  EXPECT_EQ(ds.records[0].y, Label::kLeftSafer);
  EXPECT_EQ(ds.records[1].y, Label::kRightSafer);
  EXPECT_EQ(ds.records[0].left_image_id(), "i1");
  EXPECT_FALSE(ds.records[0].has_gaze);
}

TEST_F(ManifestFixture, EmptyManifestWarns) {
  const Dataset a = load_dataset(write({}, false));
  EXPECT_TRUE(a.records.empty());
  EXPECT_FALSE(a.report.warnings.empty());
  const Dataset b = load_dataset(write({}));
  EXPECT_TRUE(b.records.empty());
  EXPECT_FALSE(b.report.warnings.empty());
}

TEST_F(ManifestFixture, MalformedRowsAreItemized) {
  std::vector<std::string> rows;
  for (int i = 0; i < 200; ++i) rows.push_back(row(i, i % 2 ? 1 : -1));
  rows.push_back("bad,row");  // 1 of 201 rows < 1%
  rows.push_back(row(5, 1));  // duplicate → 2 of 202 < 1%
  const Dataset ds = load_dataset(write(rows));
  EXPECT_EQ(ds.records.size(), 200u);
  EXPECT_EQ(ds.report.malformed, 2u);
  ASSERT_EQ(ds.report.issues.size(), 2u);
  EXPECT_EQ(ds.report.issues[0].line, 202u);
  EXPECT_EQ(ds.report.issues[1].reason, "duplicate pair_id");
}

TEST_F(ManifestFixture, MoreThanOnePercentMalformedAborts) {
  std::vector<std::string> rows;
  for (int i = 0; i < 50; ++i) rows.push_back(row(i, 1));
  rows.push_back("x" + row(99, 7).substr(1));  // bad label
  try {
    load_dataset(write(rows));
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.report().malformed, 1u);
    EXPECT_EQ(e.report().rows, 51u);
  }
}

TEST_F(ManifestFixture, MissingImageIsMalformed) {
  std::vector<std::string> rows{"m1,img/nope.png,img/i0.png,1,r,0,,"};
  LoadOptions lenient;
  lenient.max_malformed_fraction = 1.0;
  const Dataset ds = load_dataset(write(rows), lenient);
  EXPECT_TRUE(ds.records.empty());
  ASSERT_EQ(ds.report.issues.size(), 1u);
  EXPECT_NE(ds.report.issues[0].reason.find("nope.png"), std::string::npos);
}

TEST_F(ManifestFixture, GazeRowNeedsFilesAndLayout) {
  fs::create_directories(dir_ / "gz");
  std::ofstream(dir_ / "gz" / "t.csv") << "t_ms,x_px,y_px,valid\n";
  LoadOptions lenient;
  lenient.max_malformed_fraction = 1.0;
  const std::string r = "g1,img/i0.png,img/i1.png,-1,r,1,gz/t.csv,gz/t.csv";
  EXPECT_TRUE(load_dataset(write({r}), lenient).records.empty());
  std::ofstream(dir_ / "gz" / "layout.json") << "{}";
  const Dataset ds = load_dataset(write({r}), lenient);
  ASSERT_EQ(ds.records.size(), 1u);
  EXPECT_TRUE(ds.records[0].has_gaze);
  EXPECT_EQ(ds.report.with_gaze, 1u);
}

TEST_F(ManifestFixture, WrongHeaderThrows) {
  const fs::path p = dir_ / "manifest.csv";
  std::ofstream(p) << "a,b,c\n";
  EXPECT_THROW(load_dataset(p), std::runtime_error);
}

TEST_F(ManifestFixture, WriteThenLoadRoundTrip) {
  const Dataset ds = load_dataset(write({row(1, -1), row(2, 1), row(3, 1)}));
  const fs::path out = dir_ / "copy.csv";
  write_manifest(ds.records, out);
  const Dataset again = load_dataset(out);
  ASSERT_EQ(again.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(again.records[i].pair_id, ds.records[i].pair_id);
    EXPECT_EQ(again.records[i].left_image, ds.records[i].left_image);
    EXPECT_EQ(again.records[i].y, ds.records[i].y);
  }
  EXPECT_TRUE(again.report.warnings.empty());
}

TEST(SplitSizes, Hundred) {
  const SplitSizes s = split_sizes(100);
  EXPECT_EQ(s.train, 70u);
  EXPECT_EQ(s.val, 10u);
  EXPECT_EQ(s.test, 20u);
}

TEST(SplitSizes, FullDatasetSize) {
  const SplitSizes s = split_sizes(5907);
  EXPECT_EQ(s.train, 4134u);
  EXPECT_EQ(s.val, 590u);
  EXPECT_EQ(s.test, 1183u);
}

TEST(SplitSizes, FloorsTrainAndValForAllSizes) {
  for (std::size_t n = 10; n < 3000; ++n) {
    const SplitSizes s = split_sizes(n);
    EXPECT_EQ(s.train + s.val + s.test, n);
    EXPECT_LE(10 * s.train, 7 * n);
    EXPECT_GT(10 * (s.train + 1), 7 * n);
    EXPECT_LE(10 * s.val, n);
    EXPECT_GT(10 * (s.val + 1), n);
    EXPECT_GE(10 * s.test, 2 * n);
  }
}

TEST(Split, DisjointCoveringAndSeeded) {
  const auto recs = fake_records(137);
  const DatasetSplit a = split_dataset(recs, 5), b = split_dataset(recs, 5), c = split_dataset(recs, 6);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, c.train);
  std::set<std::string> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 137u);
  EXPECT_EQ(a.train.size() + a.val.size() + a.test.size(), 137u);
}

TEST(Split, TooFewRecords) {
  EXPECT_THROW(split_dataset(fake_records(9), 0), InvalidInput);
  EXPECT_NO_THROW(split_dataset(fake_records(10), 0));
}

TEST(Split, FileRoundTripAndSelect) {
  const auto recs = fake_records(20);
  const DatasetSplit s = split_dataset(recs, 9);
  const fs::path p = fs::temp_directory_path() / ("gazevit_split_" + std::to_string(::getpid()) + ".json");
  write_split(s, p);
  const DatasetSplit t = read_split(p);
  fs::remove(p);
  EXPECT_EQ(t.seed, 9u);
  EXPECT_EQ(t.train, s.train);
  EXPECT_EQ(t.test, s.test);
  const auto sel = select(recs, t.val);
  ASSERT_EQ(sel.size(), t.val.size());
  EXPECT_EQ(sel[0].pair_id, t.val[0]);
  EXPECT_THROW(select(recs, {"nope"}), InvalidInput);
}
