#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "gazevit/csv.hpp"
#include "gazevit/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gazevit;
using gazevit::testing::random_distribution;

using namespace gazevit::testing;

// --- AUC ---------------------------------------------------------------------

TEST(AucJudd, PerfectSeparation) {
  auto s = SaliencyGrid::from(3, 1, {0.1, 0.9, 0.2});
  auto f = SaliencyGrid::from(3, 1, {0, 1, 0});
  EXPECT_DOUBLE_EQ(auc_judd(s, f), 1.0);
}

TEST(AucJudd, ConstantIsChance) {
  auto s = SaliencyGrid::from(2, 2, {0.25, 0.25, 0.25, 0.25});
  auto f = SaliencyGrid::from(2, 2, {1, 0, 0, 1});
  EXPECT_DOUBLE_EQ(auc_judd(s, f), 0.5);
}

TEST(AucJudd, MatchesBruteForceRoc) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = prob_grid(rng, 4, 4);
    // Quantize some trials so ties occur.
    if (trial % 2)
      for (auto& v : s.values) v = std::round(v * 40) / 40;
    auto f = random_fixations(rng, 4, 4);
    EXPECT_NEAR(auc_judd(s, f), auc_oracle(s, f), 1e-9);
  }
}

TEST(AucJudd, NoFixationsIsUndefined) {
  SaliencyGrid s(2, 2), f(2, 2);
  EXPECT_THROW(auc_judd(s, f), UndefinedMetric);
}

// --- NSS ---------------------------------------------------------------------

TEST(Nss, ConstantMapIsZero) {
  auto s = SaliencyGrid::from(2, 2, {3, 3, 3, 3});
  auto f = SaliencyGrid::from(2, 2, {1, 0, 0, 0});
  EXPECT_EQ(nss(s, f), 0.0);
}

TEST(Nss, HandZScore) {
  auto s = SaliencyGrid::from(2, 2, {0, 0, 0, 4});
  auto f = SaliencyGrid::from(2, 2, {0, 0, 0, 1});
  EXPECT_NEAR(nss(s, f), 3.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(nss(s, f), 1.732, 1e-3);
}

TEST(Nss, ShiftInvariant) {
  Rng rng(3);
  auto s = prob_grid(rng, 4, 4);
  auto f = random_fixations(rng, 4, 4);
  auto shifted = s;
  for (auto& v : shifted.values) v += 7.5;
  EXPECT_NEAR(nss(s, f), nss(shifted, f), 1e-9);
}

TEST(Nss, NoFixationsIsUndefined) {
  auto s = SaliencyGrid::from(2, 1, {0.2, 0.8});
  EXPECT_THROW(nss(s, SaliencyGrid(2, 1)), UndefinedMetric);
}

// --- CC ----------------------------------------------------------------------

TEST(Cc, IdentityAndNegation) {
  Rng rng(5);
  auto a = prob_grid(rng, 5, 5);
  EXPECT_NEAR(cc(a, a), 1.0, 1e-12);
  auto b = a;
  for (auto& v : b.values) v = 2.0 - v;
  EXPECT_NEAR(cc(a, b), -1.0, 1e-12);
}

TEST(Cc, ConstantIsZero) {
  auto a = SaliencyGrid::from(2, 1, {0.5, 0.5});
  auto b = SaliencyGrid::from(2, 1, {0.1, 0.9});
  EXPECT_EQ(cc(a, b), 0.0);
  EXPECT_EQ(cc(b, a), 0.0);
}

TEST(Cc, MatchesCovarianceFormula) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = prob_grid(rng, 5, 5), b = prob_grid(rng, 5, 5);
    EXPECT_NEAR(cc(a, b), cc_oracle(a.values, b.values), 1e-12);
  }
}

// --- EMD ---------------------------------------------------------------------

TEST(Emd, IdenticalIsZero) {
  Rng rng(2);
  auto a = prob_grid(rng, 3, 3);
  EXPECT_EQ(emd(a, a), 0.0);
}

TEST(Emd, SingleEdge) {
  auto a = SaliencyGrid::from(2, 1, {1, 0}), b = SaliencyGrid::from(2, 1, {0, 1});
  EXPECT_NEAR(emd(a, b), 1.0, 1e-12);
}

TEST(Emd, DiagonalUsesEuclideanDistance) {
  auto a = SaliencyGrid::from(2, 2, {1, 0, 0, 0}), b = SaliencyGrid::from(2, 2, {0, 0, 0, 1});
  EXPECT_NEAR(emd(a, b), std::sqrt(2.0), 1e-12);
}

TEST(Emd, MassMismatchRejected) {
  auto a = SaliencyGrid::from(2, 1, {0.5, 0.5}), b = SaliencyGrid::from(2, 1, {0.5, 0.6});
  EXPECT_THROW(emd(a, b), InvalidInput);
}

TEST(Emd, MatchesTransportationLp) {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    auto a = prob_grid(rng, 3, 3), b = prob_grid(rng, 3, 3);
    if (trial % 4 == 0) {
      // Sparse supports exercise degenerate vertices.
      for (std::size_t i = 0; i < 9; ++i)
        if (rng.uniform() < 0.5) a.values[i] = 0.0;
      a = a.normalized();
    }
    EXPECT_NEAR(emd(a, b), transport_lp_oracle(a, b), 1e-6) << "trial " << trial;
  }
}

TEST(Emd, SymmetryAndTriangleInequality) {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = prob_grid(rng, 3, 3), b = prob_grid(rng, 3, 3), c = prob_grid(rng, 3, 3);
    const double ab = emd(a, b), ba = emd(b, a), bc = emd(b, c), ac = emd(a, c);
    EXPECT_NEAR(ab, ba, 1e-6);
    EXPECT_LE(ac, ab + bc + 1e-6);
    EXPECT_GE(ab, 0.0);
  }
}

// --- SIM / KL / IG -----------------------------------------------------------

TEST(Sim, Examples) {
  Rng rng(1);
  auto a = prob_grid(rng, 3, 3);
  EXPECT_NEAR(sim(a, a), 1.0, 1e-12);
  EXPECT_EQ(sim(SaliencyGrid::from(2, 1, {1, 0}), SaliencyGrid::from(2, 1, {0, 1})), 0.0);
  EXPECT_NEAR(sim(SaliencyGrid::from(2, 1, {0.7, 0.3}), SaliencyGrid::from(2, 1, {0.4, 0.6})), 0.7, 1e-12);
}

TEST(Kl, Examples) {
  Rng rng(4);
  auto a = prob_grid(rng, 4, 4);
  EXPECT_NEAR(kl_metric(a, a), 0.0, 1e-6);
  auto g = SaliencyGrid::from(2, 1, {0.5, 0.5}), m = SaliencyGrid::from(2, 1, {0.25, 0.75});
  const double direct = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  EXPECT_NEAR(kl_metric(g, m, 0.0), direct, 1e-12);
  EXPECT_NEAR(kl_metric(g, m), 0.1438, 1e-4);
  EXPECT_NEAR(kl_metric(g, m, 0.0, LogBase::kTwo), direct / std::log(2.0), 1e-12);
}

TEST(Kl, NonNegative) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    auto g = prob_grid(rng, 4, 4), m = prob_grid(rng, 4, 4);
    EXPECT_GE(kl_metric(g, m), -1e-9);
  }
}

TEST(InfoGain, Examples) {
  auto base = uniform_baseline(2, 2);
  auto f = SaliencyGrid::from(2, 2, {1, 0, 0, 1});
  EXPECT_NEAR(info_gain(base, f, base), 0.0, 1e-12);
  auto doubled = SaliencyGrid::from(2, 2, {0.5, 0.0, 0.0, 0.5});
  EXPECT_NEAR(info_gain(doubled, f, base, 0.0), 1.0, 1e-12);
  EXPECT_THROW(info_gain(base, SaliencyGrid(2, 2), base), UndefinedMetric);
}

TEST(InfoGain, MatchesDirectSummation) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = prob_grid(rng, 4, 4), b = prob_grid(rng, 4, 4);
    auto f = random_fixations(rng, 4, 4);
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < 16; ++i)
      if (f.values[i] > 0) {
        sum += std::log(s.values[i] + 1e-8) / std::log(2.0) - std::log(b.values[i] + 1e-8) / std::log(2.0);
        ++n;
      }
    EXPECT_NEAR(info_gain(s, f, b), sum / n, 1e-12);
  }
}

TEST(Baselines, AreDistributions) {
  auto c = center_prior_baseline(8, 8);
  EXPECT_NEAR(c.total(), 1.0, 1e-12);
  EXPECT_GT(c.at(3, 3), c.at(0, 0));
  EXPECT_DOUBLE_EQ(c.at(3, 3), c.at(4, 4));
  EXPECT_NEAR(uniform_baseline(3, 5).total(), 1.0, 1e-12);
}

// --- properties --------------------------------------------------------------

TEST(MetricProperties, IdentitiesOnRandomGrids) {
  Rng rng(37);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t w = 2 + rng.below(5), h = 2 + rng.below(5);
    auto a = prob_grid(rng, w, h);
    ASSERT_NEAR(cc(a, a), 1.0, 1e-9);
    ASSERT_NEAR(sim(a, a), 1.0, 1e-9);
    ASSERT_EQ(emd(a, a), 0.0);
  }
}

TEST(MetricProperties, TranspositionInvariance) {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = prob_grid(rng, 4, 3), b = prob_grid(rng, 4, 3);
    auto f = random_fixations(rng, 4, 3);
    const auto ev = evaluate_map(a, b, f);
    const auto et = evaluate_map(a.transposed(), b.transposed(), f.transposed());
    for (Metric k : kAllMetrics) EXPECT_NEAR(ev.get(k), et.get(k), 1e-9) << metric_name(k);
  }
}

TEST(MetricProperties, RangeInvariants) {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = prob_grid(rng, 4, 4), b = prob_grid(rng, 4, 4);
    const auto v = evaluate_map(a, b, random_fixations(rng, 4, 4));
    EXPECT_GE(v.cc, -1.0);
    EXPECT_LE(v.cc, 1.0);
    EXPECT_GE(v.sim, 0.0);
    EXPECT_LE(v.sim, 1.0 + 1e-12);
    EXPECT_GE(v.auc, 0.0);
    EXPECT_LE(v.auc, 1.0);
    EXPECT_GE(v.emd, 0.0);
    EXPECT_GE(v.kl, -1e-9);
  }
}

// --- per-image evaluation and reports ------------------------------------------

TEST(EvaluateMap, IdenticalMaps) {
  Rng rng(47);
  auto g = prob_grid(rng, 8, 8);
  auto f = random_fixations(rng, 8, 8);
  const auto v = evaluate_map(g, g, f);
  EXPECT_NEAR(v.cc, 1.0, 1e-12);
  EXPECT_NEAR(v.sim, 1.0, 1e-12);
  EXPECT_NEAR(v.emd, 0.0, 1e-12);
  EXPECT_NEAR(v.kl, 0.0, 1e-6);
}

TEST(EvaluateMap, UniformModel) {
  Rng rng(53);
  const auto v = evaluate_map(uniform_baseline(8, 8), prob_grid(rng, 8, 8), random_fixations(rng, 8, 8));
  EXPECT_DOUBLE_EQ(v.auc, 0.5);
  EXPECT_EQ(v.nss, 0.0);
  EXPECT_NEAR(v.ig, 0.0, 1e-12);
}

TEST(MetricReport, MeansEqualPerImageMeans) {
  Rng rng(59);
  MetricReport r;
  for (int i = 0; i < 25; ++i)
    r.rows.push_back({"p" + std::to_string(i), "left", "img" + std::to_string(i), "raw",
                      evaluate_map(prob_grid(rng, 8, 8), prob_grid(rng, 8, 8), random_fixations(rng, 8, 8))});
  r.aggregate();
  for (Metric k : kAllMetrics) {
    double s = 0;
    for (const auto& row : r.rows) s += row.values.get(k);
    EXPECT_NEAR(r.mean.get(k), s / 25.0, 1e-12);
  }

  // The CSV round-trips every per-image value exactly.
  const auto dir = std::filesystem::temp_directory_path() / "gazevit_test_metrics";
  std::filesystem::create_directories(dir);
  write_metric_csv(r, dir / "m.csv");
  write_metric_summary(r, dir / "s.json");
  std::ifstream in(dir / "m.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "pair_id,side,image_id,source,auc,nss,cc,emd,sim,kl,ig");
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto fields = csv::split(line);
    ASSERT_EQ(fields.size(), 11u);
    EXPECT_EQ(*csv::parse_double(fields[6]), r.rows[n].values.cc);
    ++n;
  }
  EXPECT_EQ(n, 25u);
  std::filesystem::remove_all(dir);
}

TEST(MetricReport, CombineKeepsStrongerPerMetric) {
  MetricReport raw, roll;
  raw.mean = {0.8, 1.0, 0.5, 2.0, 0.4, 0.9, 0.1};
  roll.mean = {0.7, 1.2, 0.5, 1.5, 0.5, 1.1, 0.0};
  const auto c = combine_stronger(raw, roll);
  EXPECT_EQ(c.mean.auc, 0.8);
  EXPECT_EQ(c.chosen_source[0], "raw");
  EXPECT_EQ(c.mean.nss, 1.2);
  EXPECT_EQ(c.chosen_source[1], "rollout");
  EXPECT_EQ(c.mean.emd, 1.5);
  EXPECT_EQ(c.chosen_source[3], "rollout");
  EXPECT_EQ(c.mean.kl, 0.9);
  EXPECT_EQ(c.chosen_source[5], "raw");
}
