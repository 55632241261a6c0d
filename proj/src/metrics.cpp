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
#include "gazevit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "gazevit/csv.hpp"

namespace gazevit {
namespace {

void require_same_grid(const SaliencyGrid& a, const SaliencyGrid& b, const char* what) {
  if (a.width != b.width || a.height != b.height)
    throw InvalidInput(std::string(what) + ": grids differ in size (" + std::to_string(a.width) + "x" +
                       std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                       ")");
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;  // population
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(v.size()));
  return m;
}

std::size_t count_fixations(const SaliencyGrid& fixations) {
  return static_cast<std::size_t>(std::ranges::count_if(fixations.values, [](double v) { return v > 0.0; }));
}

}  // namespace

double auc_judd(const SaliencyGrid& saliency, const SaliencyGrid& fixations) {
  require_same_grid(saliency, fixations, "auc");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < saliency.size(); ++i) (fixations.values[i] > 0.0 ? pos : neg).push_back(saliency.values[i]);
  if (pos.empty()) throw UndefinedMetric("AUC needs at least one fixation cell");
  if (neg.empty()) throw UndefinedMetric("AUC needs at least one non-fixation cell");
  std::ranges::sort(pos, std::greater<>());
  std::ranges::sort(neg, std::greater<>());
  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());

  double area = 0.0, prev_tp = 0.0, prev_fp = 0.0;
  std::size_t ip = 0, in = 0;
  while (ip < pos.size()) {
    const double t = pos[ip];
    while (ip < pos.size() && pos[ip] >= t) ++ip;
    while (in < neg.size() && neg[in] >= t) ++in;
    const double tp = static_cast<double>(ip) / np, fp = static_cast<double>(in) / nn;
    area += 0.5 * (tp + prev_tp) * (fp - prev_fp);
    prev_tp = tp, prev_fp = fp;
  }
  area += 0.5 * (1.0 + prev_tp) * (1.0 - prev_fp);
  return area;
}

double nss(const SaliencyGrid& saliency, const SaliencyGrid& fixations) {
  require_same_grid(saliency, fixations, "nss");
  const std::size_t nfix = count_fixations(fixations);
  if (nfix == 0) throw UndefinedMetric("NSS needs at least one fixation cell");
  const Moments m = moments(saliency.values);
  if (m.std == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < saliency.size(); ++i)
    if (fixations.values[i] > 0.0) s += (saliency.values[i] - m.mean) / m.std;
  return s / static_cast<double>(nfix);
}

double cc(const SaliencyGrid& a, const SaliencyGrid& b) {
  require_same_grid(a, b, "cc");
  const Moments ma = moments(a.values), mb = moments(b.values);
  if (ma.std == 0.0 || mb.std == 0.0) return 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a.values[i] - ma.mean) * (b.values[i] - mb.mean);
  cov /= static_cast<double>(a.size());
  return std::clamp(cov / (ma.std * mb.std), -1.0, 1.0);
}

namespace {

// Successive shortest paths on the bipartite transport network, Dijkstra with
// Johnson potentials. The network is tiny (≤ 2N+2 nodes), so the O(V²)
// Dijkstra without a heap is the fastest option.
class TransportSolver {
 public:
  TransportSolver(const std::vector<std::pair<std::size_t, double>>& supply,
                  const std::vector<std::pair<std::size_t, double>>& demand, std::size_t grid_width) {
    const std::size_t n = supply.size(), m = demand.size();
    nodes_ = n + m + 2;
    source_ = 0;
    sink_ = n + m + 1;
    adj_.resize(nodes_);
    for (std::size_t i = 0; i < n; ++i) add_edge(source_, 1 + i, supply[i].second, 0.0);
    for (std::size_t j = 0; j < m; ++j) add_edge(1 + n + j, sink_, demand[j].second, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = static_cast<double>(supply[i].first % grid_width);
      const double yi = static_cast<double>(supply[i].first / grid_width);
      for (std::size_t j = 0; j < m; ++j) {
        const double xj = static_cast<double>(demand[j].first % grid_width);
        const double yj = static_cast<double>(demand[j].first / grid_width);
        add_edge(1 + i, 1 + n + j, std::numeric_limits<double>::infinity(), std::hypot(xi - xj, yi - yj));
      }
    }
  }

  double solve() {
    constexpr double kTol = 1e-15;
    std::vector<double> potential(nodes_, 0.0), dist(nodes_);
    std::vector<std::size_t> prev_node(nodes_), prev_edge(nodes_);
    std::vector<bool> done(nodes_);
    double total_cost = 0.0;
    for (;;) {
      std::ranges::fill(dist, std::numeric_limits<double>::infinity());
      std::fill(done.begin(), done.end(), false);
      dist[source_] = 0.0;
      for (;;) {
        std::size_t u = nodes_;
        for (std::size_t v = 0; v < nodes_; ++v)
          if (!done[v] && std::isfinite(dist[v]) && (u == nodes_ || dist[v] < dist[u])) u = v;
        if (u == nodes_) break;
        done[u] = true;
        for (std::size_t e = 0; e < adj_[u].size(); ++e) {
          const Edge& ed = adj_[u][e];
          if (ed.cap <= kTol || done[ed.to]) continue;
          // Round-off can make reduced costs marginally negative.
          const double reduced = std::max(0.0, ed.cost + potential[u] - potential[ed.to]);
          if (dist[u] + reduced < dist[ed.to]) {
            dist[ed.to] = dist[u] + reduced;
            prev_node[ed.to] = u;
            prev_edge[ed.to] = e;
          }
        }
      }
      if (!std::isfinite(dist[sink_])) break;
      for (std::size_t v = 0; v < nodes_; ++v)
        if (std::isfinite(dist[v])) potential[v] += dist[v];
      double push = std::numeric_limits<double>::infinity();
      for (std::size_t v = sink_; v != source_; v = prev_node[v]) push = std::min(push, adj_[prev_node[v]][prev_edge[v]].cap);
      for (std::size_t v = sink_; v != source_; v = prev_node[v]) {
        Edge& ed = adj_[prev_node[v]][prev_edge[v]];
        ed.cap -= push;
        adj_[v][ed.rev].cap += push;
        total_cost += push * ed.cost;
      }
    }
    return total_cost;
  }

 private:
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };

  void add_edge(std::size_t u, std::size_t v, double cap, double cost) {
    adj_[u].push_back({v, cap, cost, adj_[v].size()});
    adj_[v].push_back({u, 0.0, -cost, adj_[u].size() - 1});
  }

  std::size_t nodes_ = 0, source_ = 0, sink_ = 0;
  std::vector<std::vector<Edge>> adj_;
};

}  // namespace

double emd(const SaliencyGrid& a, const SaliencyGrid& b) {
  require_same_grid(a, b, "emd");
  const double ma = a.total(), mb = b.total();
  if (std::abs(ma - mb) > 1e-9)
    throw InvalidInput("emd: mass mismatch (" + csv::format_double(ma) + " vs " + csv::format_double(mb) + ")");
  // Mass present in both at the same cell moves at zero cost; transport the rest.
  std::vector<std::pair<std::size_t, double>> supply, demand;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    if (d > 0.0) supply.emplace_back(i, d);
    else if (d < 0.0) demand.emplace_back(i, -d);
  }
  if (supply.empty() || demand.empty()) return 0.0;
  return TransportSolver(supply, demand, a.width).solve();
}

double sim(const SaliencyGrid& a, const SaliencyGrid& b) {
  require_same_grid(a, b, "sim");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::min(a.values[i], b.values[i]);
  return s;
}

double kl_metric(const SaliencyGrid& gaze, const SaliencyGrid& model, double eps, LogBase base) {
  require_same_grid(gaze, model, "kl");
  double s = 0.0;
  for (std::size_t i = 0; i < gaze.size(); ++i) {
    const double g = gaze.values[i];
    if (g > 0.0) s += g * std::log(g / (model.values[i] + eps));
  }
  return base == LogBase::kTwo ? s / std::log(2.0) : s;
}

double info_gain(const SaliencyGrid& saliency, const SaliencyGrid& fixations, const SaliencyGrid& baseline, double eps) {
  require_same_grid(saliency, fixations, "info_gain");
  require_same_grid(saliency, baseline, "info_gain");
  const std::size_t nfix = count_fixations(fixations);
  if (nfix == 0) throw UndefinedMetric("IG needs at least one fixation cell");
  double s = 0.0;
  for (std::size_t i = 0; i < saliency.size(); ++i)
    if (fixations.values[i] > 0.0) s += std::log2(saliency.values[i] + eps) - std::log2(baseline.values[i] + eps);
  return s / static_cast<double>(nfix);
}

SaliencyGrid uniform_baseline(std::size_t width, std::size_t height) {
  return SaliencyGrid::from(width, height, std::vector<double>(width * height, 1.0 / static_cast<double>(width * height)),
                            NormState::kProbability);
}

SaliencyGrid center_prior_baseline(std::size_t width, std::size_t height, double sigma_frac) {
  SaliencyGrid g(width, height, NormState::kProbability);
  const double sigma = sigma_frac * static_cast<double>(std::min(width, height));
  const double cx = 0.5 * static_cast<double>(width) - 0.5, cy = 0.5 * static_cast<double>(height) - 0.5;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      g.at(x, y) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return g.normalized();
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kAuc: return "auc";
    case Metric::kNss: return "nss";
    case Metric::kCc: return "cc";
    case Metric::kEmd: return "emd";
    case Metric::kSim: return "sim";
    case Metric::kKl: return "kl";
    case Metric::kIg: return "ig";
  }
  return "?";
}

bool higher_is_better(Metric m) { return m != Metric::kEmd && m != Metric::kKl; }

double MetricValues::get(Metric m) const {
  switch (m) {
    case Metric::kAuc: return auc;
    case Metric::kNss: return nss;
    case Metric::kCc: return cc;
    case Metric::kEmd: return emd;
    case Metric::kSim: return sim;
    case Metric::kKl: return kl;
    case Metric::kIg: return ig;
  }
  return 0.0;
}

void MetricValues::set(Metric m, double v) {
  switch (m) {
    case Metric::kAuc: auc = v; break;
    case Metric::kNss: nss = v; break;
    case Metric::kCc: cc = v; break;
    case Metric::kEmd: emd = v; break;
    case Metric::kSim: sim = v; break;
    case Metric::kKl: kl = v; break;
    case Metric::kIg: ig = v; break;
  }
}

MetricValues evaluate_map(const SaliencyGrid& model, const SaliencyGrid& gaze, const SaliencyGrid& fixations,
                          const MetricSettings& settings) {
  const SaliencyGrid m = model.normalized();
  const SaliencyGrid g = gaze.normalized();
  const SaliencyGrid baseline = settings.center_prior_baseline
                                    ? center_prior_baseline(m.width, m.height, settings.center_prior_sigma_frac)
                                    : uniform_baseline(m.width, m.height);
  MetricValues v;
  v.auc = auc_judd(m, fixations);
  v.nss = nss(m, fixations);
  v.cc = cc(m, g);
  v.emd = emd(m, g);
  v.sim = sim(m, g);
  v.kl = kl_metric(g, m, settings.eps, settings.kl_base);
  v.ig = info_gain(m, fixations, baseline, settings.eps);
  return v;
}

void MetricReport::aggregate() {
  mean = {};
  if (rows.empty()) return;
  for (Metric k : kAllMetrics) {
    double s = 0.0;
    for (const auto& r : rows) s += r.values.get(k);
    mean.set(k, s / static_cast<double>(rows.size()));
  }
}

MetricReport combine_stronger(const MetricReport& raw, const MetricReport& rollout) {
  MetricReport out;
  out.rows = raw.rows;
  out.rows.insert(out.rows.end(), rollout.rows.begin(), rollout.rows.end());
  out.skipped = raw.skipped;
  for (std::size_t i = 0; i < kAllMetrics.size(); ++i) {
    const Metric k = kAllMetrics[i];
    const double a = raw.mean.get(k), b = rollout.mean.get(k);
    const bool take_raw = higher_is_better(k) ? a >= b : a <= b;
    out.mean.set(k, take_raw ? a : b);
    out.chosen_source[i] = take_raw ? "raw" : "rollout";
  }
  return out;
}

void write_metric_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "pair_id,side,image_id,source";
  for (Metric k : kAllMetrics) out << ',' << metric_name(k);
  out << '\n';
  for (const auto& r : report.rows) {
    out << csv::escape(r.pair_id) << ',' << r.side << ',' << csv::escape(r.image_id) << ',' << r.source;
    for (Metric k : kAllMetrics) out << ',' << csv::format_double(r.values.get(k));
    out << '\n';
  }
}

void write_metric_summary(const MetricReport& report, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["images"] = report.rows.size();
  for (std::size_t i = 0; i < kAllMetrics.size(); ++i) {
    j["mean"][metric_name(kAllMetrics[i])] = report.mean.get(kAllMetrics[i]);
    if (!report.chosen_source[i].empty()) j["source"][metric_name(kAllMetrics[i])] = report.chosen_source[i];
  }
  j["skipped"] = report.skipped;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace gazevit
