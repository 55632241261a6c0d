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
#include "gazevit/gaze.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "gazevit/csv.hpp"

namespace gazevit {

const char* to_string(Side side) { return side == Side::kLeft ? "left" : "right"; }

void TrialLayout::validate() const {
  auto inside = [&](const Rect& r) {
    return r.width > 0 && r.height > 0 && r.x >= 0 && r.y >= 0 && r.x + r.width <= static_cast<double>(screen_width) &&
           r.y + r.height <= static_cast<double>(screen_height);
  };
  if (!inside(left_region) || !inside(right_region)) throw InvalidInput("trial layout: region outside the screen");
  const bool disjoint = left_region.x + left_region.width <= right_region.x ||
                        right_region.x + right_region.width <= left_region.x ||
                        left_region.y + left_region.height <= right_region.y ||
                        right_region.y + right_region.height <= left_region.y;
  if (!disjoint) throw InvalidInput("trial layout: left and right regions overlap");
}

SaliencyGrid SaliencyGrid::from(std::size_t w, std::size_t h, std::vector<double> values, NormState state) {
  if (values.size() != w * h) throw InvalidInput("saliency grid: value count does not match dimensions");
  SaliencyGrid g;
  g.width = w;
  g.height = h;
  g.values = std::move(values);
  g.norm = state;
  return g;
}

double SaliencyGrid::total() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

SaliencyGrid SaliencyGrid::normalized() const {
  SaliencyGrid out = *this;
  const double s = total();
  if (s > 0.0) {
    for (auto& v : out.values) v /= s;
  } else if (!out.values.empty()) {
    std::ranges::fill(out.values, 1.0 / static_cast<double>(out.values.size()));
  }
  out.norm = NormState::kProbability;
  return out;
}

SaliencyGrid SaliencyGrid::transposed() const {
  SaliencyGrid out(height, width, norm);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) out.at(y, x) = at(x, y);
  return out;
}

std::vector<FixationEvent> detect_fixations(std::span<const GazeSample> samples, double dispersion_px,
                                            double min_duration_ms) {
  if (!(dispersion_px > 0.0)) throw InvalidInput("dispersion threshold must be positive");
  if (!(min_duration_ms > 0.0)) throw InvalidInput("minimum fixation duration must be positive");
  std::vector<FixationEvent> out;
  const std::size_t n = samples.size();

  struct Extent {
    double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
    void add(const GazeSample& s) {
      min_x = std::min(min_x, s.x), max_x = std::max(max_x, s.x);
      min_y = std::min(min_y, s.y), max_y = std::max(max_y, s.y);
    }
    double dispersion() const { return (max_x - min_x) + (max_y - min_y); }
  };

  std::size_t i = 0;
  while (i < n) {
    if (!samples[i].valid) {
      ++i;
      continue;
    }
    // Initial window: smallest run of valid samples spanning the minimum duration.
    std::size_t j = i;
    Extent ext;
    ext.add(samples[i]);
    bool broken = false;
    while (samples[j].t_ms - samples[i].t_ms < min_duration_ms) {
      if (j + 1 >= n) break;
      if (!samples[j + 1].valid) {
        broken = true;
        break;
      }
      ++j;
      ext.add(samples[j]);
    }
    if (broken) {
      i = j + 2;  // restart past the invalid sample
      continue;
    }
    if (samples[j].t_ms - samples[i].t_ms < min_duration_ms) break;  // stream exhausted
    if (ext.dispersion() > dispersion_px) {
      ++i;
      continue;
    }
    while (j + 1 < n && samples[j + 1].valid) {
      Extent grown = ext;
      grown.add(samples[j + 1]);
      if (grown.dispersion() > dispersion_px) break;
      ext = grown;
      ++j;
    }
    FixationEvent f;
    for (std::size_t k = i; k <= j; ++k) {
      f.x += samples[k].x;
      f.y += samples[k].y;
    }
    const auto count = static_cast<double>(j - i + 1);
    f.x /= count;
    f.y /= count;
    f.onset_ms = samples[i].t_ms;
    f.duration_ms = samples[j].t_ms - samples[i].t_ms;
    out.push_back(f);
    i = j + 1;
  }
  return out;
}

SaliencyGrid build_fixation_map(std::span<const FixationEvent> fixations, const TrialLayout& layout, Side side,
                                FixationWeighting weighting) {
  const Rect& r = layout.region(side);
  const auto w = static_cast<std::size_t>(std::llround(r.width));
  const auto h = static_cast<std::size_t>(std::llround(r.height));
  SaliencyGrid map(w, h);
  for (const auto& f : fixations) {
    if (!r.contains(f.x, f.y)) continue;
    const auto cx = std::min(static_cast<std::size_t>(std::floor(f.x - r.x)), w - 1);
    const auto cy = std::min(static_cast<std::size_t>(std::floor(f.y - r.y)), h - 1);
    map.at(cx, cy) += weighting == FixationWeighting::kDuration ? f.duration_ms : 1.0;
  }
  return map;
}

double sigma_from_geometry(const TrialLayout& layout) {
  if (!(layout.viewing_distance_cm > 0.0) || !(layout.monitor_diagonal_in > 0.0) || layout.resolution_width == 0 ||
      layout.resolution_height == 0)
    throw InvalidInput("viewing geometry must be positive");
  const double diag_px = std::hypot(static_cast<double>(layout.resolution_width),
                                    static_cast<double>(layout.resolution_height));
  const double pitch_mm = 25.4 * layout.monitor_diagonal_in / diag_px;
  const double one_degree_mm = 2.0 * layout.viewing_distance_cm * 10.0 * std::tan(0.5 * std::numbers::pi / 180.0);
  return one_degree_mm / pitch_mm;
}

namespace {

std::vector<double> gaussian_kernel(double sigma, std::size_t& radius) {
  radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(radius);
    s += (k[i] = std::exp(-d * d / (2.0 * sigma * sigma)));
  }
  for (auto& v : k) v /= s;
  return k;
}

}  // namespace

SaliencyGrid smooth(const SaliencyGrid& map, double sigma_px) {
  if (!(sigma_px > 0.0)) throw InvalidInput("smoothing sigma must be positive");
  std::size_t r = 0;
  const auto k = gaussian_kernel(sigma_px, r);
  const std::size_t w = map.width, h = map.height;
  SaliencyGrid out(w, h, map.norm);
  const auto ri = static_cast<std::ptrdiff_t>(r);

  std::size_t nnz = 0;
  for (double v : map.values) nnz += v != 0.0;
  const double sparse_cost = static_cast<double>(nnz) * static_cast<double>(k.size() * k.size());
  const double dense_cost = 2.0 * static_cast<double>(w * h) * static_cast<double>(k.size());

  if (sparse_cost < dense_cost) {
    // Fixation maps are a handful of impulses: stamp the kernel at each.
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double v = map.at(x, y);
        if (v == 0.0) continue;
        for (std::ptrdiff_t dy = -ri; dy <= ri; ++dy) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double ky = k[static_cast<std::size_t>(dy + ri)] * v;
          for (std::ptrdiff_t dx = -ri; dx <= ri; ++dx) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
            out.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy)) +=
                ky * k[static_cast<std::size_t>(dx + ri)];
          }
        }
      }
    return out;
  }

  // Separable pass: rows then columns.
  std::vector<double> tmp(w * h, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t d = -ri; d <= ri; ++d) {
        const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + d;
        if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
        s += k[static_cast<std::size_t>(d + ri)] * map.values[y * w + static_cast<std::size_t>(xx)];
      }
      tmp[y * w + x] = s;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t d = -ri; d <= ri; ++d) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + d;
        if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
        s += k[static_cast<std::size_t>(d + ri)] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out.at(x, y) = s;
    }
  return out;
}

SaliencyGrid to_patch_distribution(const SaliencyGrid& map, const PatchGrid& grid, double eps) {
  if (grid.rows == 0 || grid.cols == 0 || grid.image_height % grid.rows || grid.image_width % grid.cols)
    throw InvalidInput("patch grid must evenly divide the model resolution");
  if (eps < 0.0) throw InvalidInput("eps must be non-negative");
  const auto resized = resize_bilinear(map.values, map.height, map.width, 1, grid.image_height, grid.image_width);
  const std::size_t ph = grid.image_height / grid.rows, pw = grid.image_width / grid.cols;
  SaliencyGrid out(grid.cols, grid.rows, NormState::kProbability);
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t c = 0; c < grid.cols; ++c) {
      double s = 0.0;
      for (std::size_t y = 0; y < ph; ++y)
        for (std::size_t x = 0; x < pw; ++x) s += resized[(r * ph + y) * grid.image_width + c * pw + x];
      out.at(c, r) = s / static_cast<double>(ph * pw);
    }
  // Normalize the pooled mass first so eps acts on a scale-free distribution.
  const double mass = out.total();
  for (auto& v : out.values) v = (mass > 0.0 ? v / mass : 0.0) + eps;
  const double z = out.total();
  if (z > 0.0) {
    for (auto& v : out.values) v /= z;
  } else {
    std::ranges::fill(out.values, 1.0 / static_cast<double>(out.size()));
  }
  return out;
}

SaliencyGrid fixation_cells(std::span<const FixationEvent> fixations, const TrialLayout& layout, Side side,
                            const PatchGrid& grid) {
  const Rect& r = layout.region(side);
  SaliencyGrid out(grid.cols, grid.rows);
  for (const auto& f : fixations) {
    if (!r.contains(f.x, f.y)) continue;
    const auto c = std::min(static_cast<std::size_t>((f.x - r.x) / r.width * static_cast<double>(grid.cols)), grid.cols - 1);
    const auto rr = std::min(static_cast<std::size_t>((f.y - r.y) / r.height * static_cast<double>(grid.rows)), grid.rows - 1);
    out.at(c, rr) = 1.0;
  }
  return out;
}

GazeArtifacts process_gaze(std::span<const GazeSample> samples, const TrialLayout& layout, Side side,
                           const GazeConfig& config, const PatchGrid& grid) {
  const double one_degree = sigma_from_geometry(layout);
  const double dispersion = config.dispersion_px > 0.0 ? config.dispersion_px : one_degree;
  const double sigma = config.sigma_px > 0.0 ? config.sigma_px : one_degree;
  GazeArtifacts out;
  for (const auto& f : detect_fixations(samples, dispersion, config.min_duration_ms))
    if (layout.region(side).contains(f.x, f.y)) out.fixations.push_back(f);
  out.saliency = smooth(build_fixation_map(out.fixations, layout, side, config.weighting), sigma);
  out.patch_distribution = to_patch_distribution(out.saliency, grid, config.eps);
  out.fixation_points = fixation_cells(out.fixations, layout, side, grid);
  return out;
}

std::vector<GazeSample> read_gaze_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gaze file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  const auto header = csv::split(line);
  const std::vector<std::string> expected = {"t_ms", "x_px", "y_px", "valid"};
  std::vector<std::string> trimmed;
  for (const auto& h : header) trimmed.push_back(csv::trim(h));
  if (trimmed != expected) throw std::runtime_error(path.string() + ": header must be t_ms,x_px,y_px,valid");
  std::vector<GazeSample> out;
  std::size_t line_no = 1;
  double last_t = -INFINITY;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 4) fail("expected 4 fields");
    GazeSample s;
    auto t = csv::parse_double(f[0]);
    auto valid = csv::parse_bool(f[3]);
    if (!t || !valid) fail("malformed t_ms or valid");
    s.t_ms = *t;
    s.valid = *valid;
    if (s.t_ms < last_t) fail("timestamps must be non-decreasing");
    last_t = s.t_ms;
    if (s.valid) {
      auto x = csv::parse_double(f[1]);
      auto y = csv::parse_double(f[2]);
      if (!x || !y) fail("valid sample without coordinates");
      s.x = *x;
      s.y = *y;
    }
    out.push_back(s);
  }
  return out;
}

void write_gaze_csv(std::span<const GazeSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t_ms,x_px,y_px,valid\n";
  for (const auto& s : samples) {
    out << csv::format_double(s.t_ms) << ',';
    if (s.valid) out << csv::format_double(s.x) << ',' << csv::format_double(s.y) << ",1\n";
    else out << ",,0\n";
  }
}

namespace {

Rect rect_from_json(const nlohmann::json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("width").get<double>(), j.at("height").get<double>()};
}

nlohmann::json rect_to_json(const Rect& r) {
  return {{"x", r.x}, {"y", r.y}, {"width", r.width}, {"height", r.height}};
}

}  // namespace

TrialLayout read_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open layout " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    TrialLayout l;
    l.screen_width = j.at("screen").at("width").get<std::size_t>();
    l.screen_height = j.at("screen").at("height").get<std::size_t>();
    l.left_region = rect_from_json(j.at("left_region"));
    l.right_region = rect_from_json(j.at("right_region"));
    l.viewing_distance_cm = j.value("viewing_distance_cm", 50.0);
    l.monitor_diagonal_in = j.value("monitor_diagonal_in", 24.0);
    if (j.contains("resolution")) {
      l.resolution_width = j["resolution"].at("width").get<std::size_t>();
      l.resolution_height = j["resolution"].at("height").get<std::size_t>();
    } else {
      l.resolution_width = l.screen_width;
      l.resolution_height = l.screen_height;
    }
    l.validate();
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_layout(const TrialLayout& layout, const std::filesystem::path& path) {
  nlohmann::json j = {
      {"screen", {{"width", layout.screen_width}, {"height", layout.screen_height}}},
      {"left_region", rect_to_json(layout.left_region)},
      {"right_region", rect_to_json(layout.right_region)},
      {"viewing_distance_cm", layout.viewing_distance_cm},
      {"monitor_diagonal_in", layout.monitor_diagonal_in},
      {"resolution", {{"width", layout.resolution_width}, {"height", layout.resolution_height}}},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

constexpr char kGridMagic[4] = {'S', 'G', 'R', 'D'};
constexpr std::uint16_t kGridVersion = 1;
static_assert(std::endian::native == std::endian::little, "SGRD I/O assumes a little-endian host");

}  // namespace

void write_sgrd(const SaliencyGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::uint16_t flag = grid.norm == NormState::kProbability ? 1 : 0;
  const auto w = static_cast<std::uint32_t>(grid.width), h = static_cast<std::uint32_t>(grid.height);
  out.write(kGridMagic, 4);
  out.write(reinterpret_cast<const char*>(&kGridVersion), 2);
  out.write(reinterpret_cast<const char*>(&flag), 2);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  for (double v : grid.values) {
    const auto f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
}

SaliencyGrid read_sgrd(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  std::uint16_t version = 0, flag = 0;
  std::uint32_t w = 0, h = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 2);
  in.read(reinterpret_cast<char*>(&flag), 2);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || std::memcmp(magic, kGridMagic, 4) != 0) throw std::runtime_error(path.string() + ": not an SGRD file");
  if (version != kGridVersion) throw std::runtime_error(path.string() + ": unsupported SGRD version");
  SaliencyGrid g(w, h, flag ? NormState::kProbability : NormState::kRawMass);
  for (auto& v : g.values) {
    float f;
    in.read(reinterpret_cast<char*>(&f), 4);
    v = f;
  }
  if (!in) throw std::runtime_error(path.string() + ": truncated SGRD payload");
  return g;
}

Image saliency_to_image(const SaliencyGrid& grid) {
  Image img(grid.height, grid.width, 1);
  double mx = 0.0;
  for (double v : grid.values) mx = std::max(mx, v);
  for (std::size_t i = 0; i < grid.values.size(); ++i) img.pixels[i] = mx > 0.0 ? grid.values[i] / mx : 0.0;
  return img;
}

}  // namespace gazevit
