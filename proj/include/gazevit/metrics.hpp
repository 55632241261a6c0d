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

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazevit/gaze.hpp"

namespace gazevit {

/// A metric has no value for this input (e.g. no fixation cells).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class LogBase { kNatural, kTwo };

// Fixation sets are grids whose positive cells are fixation locations.

/// AUC-Judd: thresholds at the saliency values of fixation cells; TPR over
/// fixation cells, FPR over all other cells; trapezoidal area.
double auc_judd(const SaliencyGrid& saliency, const SaliencyGrid& fixations);
/// Mean z-score (population std) at fixation cells; 0 for constant maps.
double nss(const SaliencyGrid& saliency, const SaliencyGrid& fixations);
/// Pearson correlation; 0 if either map is constant.
double cc(const SaliencyGrid& a, const SaliencyGrid& b);
/// Exact optimal-transport cost between equal-mass grids, ground distance =
/// Euclidean distance between cell centres in cell units.
double emd(const SaliencyGrid& a, const SaliencyGrid& b);
/// Σ min(a_i, b_i).
double sim(const SaliencyGrid& a, const SaliencyGrid& b);
/// Σ g_i log(g_i / (m_i + eps)), gaze as the reference distribution.
double kl_metric(const SaliencyGrid& gaze, const SaliencyGrid& model, double eps = 1e-8,
                 LogBase base = LogBase::kNatural);
/// Mean over fixation cells of log₂(s_i + eps) − log₂(b_i + eps), in bits.
double info_gain(const SaliencyGrid& saliency, const SaliencyGrid& fixations, const SaliencyGrid& baseline,
                 double eps = 1e-8);

/// Uniform probability grid.
SaliencyGrid uniform_baseline(std::size_t width, std::size_t height);
/// Isotropic Gaussian centred on the grid, σ = frac·min(width, height) cells.
SaliencyGrid center_prior_baseline(std::size_t width, std::size_t height, double sigma_frac = 0.25);

enum class Metric { kAuc, kNss, kCc, kEmd, kSim, kKl, kIg };
inline constexpr std::array<Metric, 7> kAllMetrics = {Metric::kAuc, Metric::kNss, Metric::kCc, Metric::kEmd,
                                                      Metric::kSim, Metric::kKl,  Metric::kIg};
const char* metric_name(Metric m);
/// EMD and KL are distances; the rest improve upwards.
bool higher_is_better(Metric m);

struct MetricValues {
  double auc = 0.0, nss = 0.0, cc = 0.0, emd = 0.0, sim = 0.0, kl = 0.0, ig = 0.0;

  double get(Metric m) const;
  void set(Metric m, double v);
};

struct MetricSettings {
  double eps = 1e-8;
  LogBase kl_base = LogBase::kNatural;
  bool center_prior_baseline = false;
  double center_prior_sigma_frac = 0.25;
};

/// All seven metrics for one image: model map vs gaze distribution and
/// fixation set, all on the same grid.
MetricValues evaluate_map(const SaliencyGrid& model, const SaliencyGrid& gaze, const SaliencyGrid& fixations,
                          const MetricSettings& settings = {});

struct MetricRow {
  std::string pair_id;
  std::string side;
  std::string image_id;
  std::string source;
  MetricValues values;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  MetricValues mean;
  // Per metric, the extraction method the aggregate came from (set when
  // several sources were compared).
  std::array<std::string, 7> chosen_source;
  std::vector<std::string> skipped;  // reasons for pairs left out

  /// Recomputes `mean` from `rows`.
  void aggregate();
};

/// Per metric, keeps the better of the two aggregate means and labels it.
MetricReport combine_stronger(const MetricReport& raw, const MetricReport& rollout);

void write_metric_csv(const MetricReport& report, const std::filesystem::path& path);
void write_metric_summary(const MetricReport& report, const std::filesystem::path& path);

}  // namespace gazevit
