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
#include "gazevit/synth.hpp"

#include <cstdio>

#include "gazevit/image.hpp"
#include "gazevit/random.hpp"

namespace gazevit {
namespace fs = std::filesystem;

namespace {

constexpr double kSampleMs = 1000.0 / 60.0;

Image make_image(Rng& rng, const SynthConfig& c, std::size_t cell, bool bright) {
  Image img(c.image_size, c.image_size, 3);
  for (auto& v : img.pixels) v = rng.uniform(0.0, 0.3);
  const std::size_t cols = c.image_size / c.patch_size;
  const std::size_t y0 = (cell / cols) * c.patch_size, x0 = (cell % cols) * c.patch_size;
  for (std::size_t y = y0; y < y0 + c.patch_size; ++y)
    for (std::size_t x = x0; x < x0 + c.patch_size; ++x) {
      img.at(y, x, 0) = bright ? 1.0 : 0.55;
      img.at(y, x, 1) = bright ? 1.0 : 0.1;
      img.at(y, x, 2) = bright ? 1.0 : 0.1;
    }
  return img;
}

// Screen point inside `cell` of a region, jittered around the cell centre.
std::pair<double, double> cell_point(Rng& rng, const Rect& region, const SynthConfig& c, std::size_t cell) {
  const std::size_t cols = c.image_size / c.patch_size;
  const double cell_px = region.width * static_cast<double>(c.patch_size) / static_cast<double>(c.image_size);
  const double cx = region.x + (static_cast<double>(cell % cols) + 0.5) * cell_px;
  const double cy = region.y + (static_cast<double>(cell / cols) + 0.5) * cell_px;
  const double j = 0.2 * cell_px;
  return {cx + rng.uniform(-j, j), cy + rng.uniform(-j, j)};
}

struct Dwell {
  double x, y, ms;
};

std::vector<GazeSample> render(Rng& rng, const std::vector<Dwell>& dwells) {
  std::vector<GazeSample> out;
  double t = 0.0;
  for (std::size_t d = 0; d < dwells.size(); ++d) {
    if (d > 0) {
      // Two saccade samples on the straight line between dwell points.
      for (int k = 1; k <= 2; ++k) {
        const double a = k / 3.0;
        out.push_back({t, dwells[d - 1].x + a * (dwells[d].x - dwells[d - 1].x),
                       dwells[d - 1].y + a * (dwells[d].y - dwells[d - 1].y), true});
        t += kSampleMs;
      }
    }
    const auto n = static_cast<std::size_t>(dwells[d].ms / kSampleMs);
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({t, dwells[d].x + 2.0 * rng.normal(), dwells[d].y + 2.0 * rng.normal(), true});
      t += kSampleMs;
    }
  }
  return out;
}

}  // namespace

TrialLayout synth_layout() {
  TrialLayout l;
  l.left_region = {320, 344, 512, 512};
  l.right_region = {1088, 344, 512, 512};
  return l;
}

SynthDataset generate_planted_target(const fs::path& out_dir, const SynthConfig& c) {
  const fs::path dir = fs::absolute(out_dir);
  if (c.patch_size == 0 || c.image_size % c.patch_size != 0)
    throw InvalidInput("synthetic image size must be a multiple of the patch size");
  if (c.pairs == 0) throw InvalidInput("synthetic dataset needs at least one pair");
  const std::size_t cells = (c.image_size / c.patch_size) * (c.image_size / c.patch_size);
  fs::create_directories(dir / "images");
  Rng rng(c.seed);

  // Balanced labels in a seeded order; gaze on the first share of a second shuffle.
  std::vector<int> labels(c.pairs);
  for (std::size_t i = 0; i < c.pairs; ++i) labels[i] = i % 2 ? 1 : -1;
  rng.shuffle(labels);
  const auto n_gaze = static_cast<std::size_t>(c.gaze_fraction * static_cast<double>(c.pairs) + 0.5);
  std::vector<bool> gaze(c.pairs, false);
  for (std::size_t i = 0; i < n_gaze && i < c.pairs; ++i) gaze[i] = true;
  rng.shuffle(gaze);

  const TrialLayout layout = synth_layout();
  SynthDataset ds;
  ds.manifest = dir / "manifest.csv";
  for (std::size_t i = 0; i < c.pairs; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "p%04zu", i);
    const std::size_t cl = rng.below(cells), cr = rng.below(cells);
    const bool left_bright = labels[i] == -1;
    ComparisonRecord r;
    r.pair_id = id;
    r.y = label_from_int(labels[i]);
    r.respondent_id = "synthetic";
    r.left_image = dir / "images" / (r.pair_id + "_L.png");
    r.right_image = dir / "images" / (r.pair_id + "_R.png");
    save_png(make_image(rng, c, cl, left_bright), r.left_image);
    save_png(make_image(rng, c, cr, !left_bright), r.right_image);
    if (gaze[i]) {
      const fs::path gdir = dir / "gaze" / r.pair_id;
      fs::create_directories(gdir);
      std::vector<Dwell> dwells;
      dwells.push_back({960.0, 600.0, 250.0});  // central fixation cross
      for (const Side side : {Side::kLeft, Side::kRight}) {
        const Rect& region = layout.region(side);
        const std::size_t obj = side == Side::kLeft ? cl : cr;
        auto [x, y] = cell_point(rng, region, c, obj);
        dwells.push_back({x, y, rng.uniform(300.0, 450.0)});
        if (rng.uniform() < 0.5) {
          std::size_t other = rng.below(cells);
          if (other == obj) other = (other + 1) % cells;
          auto [dx, dy] = cell_point(rng, region, c, other);
          dwells.push_back({dx, dy, 150.0});
        }
      }
      auto samples = render(rng, dwells);
      write_gaze_csv(samples, gdir / "trial.csv");
      write_layout(layout, gdir / "layout.json");
      r.has_gaze = true;
      r.left_gaze = r.right_gaze = gdir / "trial.csv";
    }
    ds.records.push_back(r);
    ds.objects.emplace_back(cl, cr);
  }
  // The manifest stores paths relative to its own directory.
  std::vector<ComparisonRecord> rel = ds.records;
  for (auto& r : rel) {
    r.left_image = fs::relative(r.left_image, dir);
    r.right_image = fs::relative(r.right_image, dir);
    if (r.has_gaze) {
      r.left_gaze = fs::relative(r.left_gaze, dir);
      r.right_gaze = fs::relative(r.right_gaze, dir);
    }
  }
  write_manifest(rel, ds.manifest);
  return ds;
}

}  // namespace gazevit
