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
#include "gazevit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <opencv2/imgproc.hpp>

#include "gazevit/image.hpp"

namespace gazevit {
namespace fs = std::filesystem;

BenchSource bench_source_from_string(const std::string& name) {
  if (name == "raw") return BenchSource::kRaw;
  if (name == "rollout") return BenchSource::kRollout;
  if (name == "both") return BenchSource::kBoth;
  throw InvalidInput("attention source must be raw, rollout or both, got '" + name + "'");
}

AttentionMapFn model_attention(const SiameseModel& model) {
  return [&model](const PreparedPair& pair, Side side, AttentionSource source) {
    Tape tape(false);
    const EncoderOutput enc = model.encode(tape, side == Side::kLeft ? pair.left : pair.right);
    return extract_attention(tape, enc.attention, source).values();
  };
}

namespace {

SaliencyGrid upsample(std::span<const double> map, std::size_t rows, std::size_t cols, std::size_t h, std::size_t w) {
  return SaliencyGrid::from(w, h, resize_bilinear(map, rows, cols, 1, h, w));
}

// Metrics at image resolution; EMD on the patch grid.
MetricValues evaluate_pixels(const PreparedPair& pair, Side side, const std::vector<double>& patch_map,
                             const ModelConfig& mc, const BenchOptions& o) {
  const std::size_t h = mc.image_height, w = mc.image_width;
  const GazeArtifacts art = process_record_side(pair.record, side, mc, o.gaze);
  const SaliencyGrid m = upsample(patch_map, mc.grid_rows(), mc.grid_cols(), h, w).normalized();
  const SaliencyGrid g =
      SaliencyGrid::from(w, h, resize_bilinear(art.saliency.values, art.saliency.height, art.saliency.width, 1, h, w))
          .normalized();
  SaliencyGrid fix(w, h);
  const Rect& region = read_layout(
      (side == Side::kLeft ? pair.record.left_gaze : pair.record.right_gaze).parent_path() / "layout.json")
                           .region(side);
  for (const auto& f : art.fixations) {
    const auto x = static_cast<std::size_t>((f.x - region.x) / region.width * static_cast<double>(w));
    const auto y = static_cast<std::size_t>((f.y - region.y) / region.height * static_cast<double>(h));
    fix.at(std::min(x, w - 1), std::min(y, h - 1)) = 1.0;
  }
  const SaliencyGrid baseline = o.metrics.center_prior_baseline
                                    ? center_prior_baseline(w, h, o.metrics.center_prior_sigma_frac)
                                    : uniform_baseline(w, h);
  MetricValues v;
  v.auc = auc_judd(m, fix);
  v.nss = nss(m, fix);
  v.cc = cc(m, g);
  v.sim = sim(m, g);
  v.kl = kl_metric(g, m, o.metrics.eps, o.metrics.kl_base);
  v.ig = info_gain(m, fix, baseline, o.metrics.eps);
  const auto& gd = side == Side::kLeft ? pair.gaze_left->distribution : pair.gaze_right->distribution;
  v.emd = emd(SaliencyGrid::from(mc.grid_cols(), mc.grid_rows(), patch_map).normalized(),
              SaliencyGrid::from(mc.grid_cols(), mc.grid_rows(), gd).normalized());
  return v;
}

MetricReport run_source(const std::vector<PreparedPair>& pairs, const ModelConfig& mc, const AttentionMapFn& map,
                        AttentionSource source, const BenchOptions& o) {
  MetricReport report;
  for (const auto& pair : pairs) {
    if (!pair.has_gaze()) {
      report.skipped.push_back(pair.record.pair_id + ": no gaze");
      continue;
    }
    for (const Side side : {Side::kLeft, Side::kRight}) {
      const SideGaze& g = side == Side::kLeft ? *pair.gaze_left : *pair.gaze_right;
      const std::vector<double> m = map(pair, side, source);
      if (m.size() != mc.num_patches())
        throw InvalidInput("attention map has " + std::to_string(m.size()) + " cells, expected " +
                           std::to_string(mc.num_patches()));
      MetricRow row;
      row.pair_id = pair.record.pair_id;
      row.side = to_string(side);
      row.image_id = side == Side::kLeft ? pair.record.left_image_id() : pair.record.right_image_id();
      row.source = to_string(source);
      try {
        row.values = o.pixel_mode ? evaluate_pixels(pair, side, m, mc, o)
                                  : evaluate_map(SaliencyGrid::from(mc.grid_cols(), mc.grid_rows(), m),
                                                 SaliencyGrid::from(mc.grid_cols(), mc.grid_rows(), g.distribution),
                                                 g.fixation_points, o.metrics);
      } catch (const UndefinedMetric& e) {
        report.skipped.push_back(row.pair_id + "/" + row.side + ": " + e.what());
        continue;
      }
      report.rows.push_back(std::move(row));
    }
  }
  report.aggregate();
  report.chosen_source.fill(to_string(source));
  return report;
}

}  // namespace

MetricReport benchmark_maps(const std::vector<PreparedPair>& pairs, const ModelConfig& model,
                            const AttentionMapFn& map, const BenchOptions& options) {
  if (std::ranges::none_of(pairs, [](const PreparedPair& p) { return p.has_gaze(); }))
    throw InvalidInput("attention benchmark needs at least one gaze-bearing pair");
  switch (options.source) {
    case BenchSource::kRaw: return run_source(pairs, model, map, AttentionSource::kRaw, options);
    case BenchSource::kRollout: return run_source(pairs, model, map, AttentionSource::kRollout, options);
    case BenchSource::kBoth: break;
  }
  return combine_stronger(run_source(pairs, model, map, AttentionSource::kRaw, options),
                          run_source(pairs, model, map, AttentionSource::kRollout, options));
}

MetricReport benchmark_attention(const SiameseModel& model, const std::vector<PreparedPair>& pairs,
                                 const BenchOptions& options) {
  return benchmark_maps(pairs, model.config(), model_attention(model), options);
}

Image render_heatmap(std::span<const double> map, std::size_t rows, std::size_t cols, std::size_t height,
                     std::size_t width) {
  if (map.size() != rows * cols) throw InvalidInput("heatmap size does not match its grid");
  const std::vector<double> up = resize_bilinear(map, rows, cols, 1, height, width);
  const double peak = *std::ranges::max_element(up);
  cv::Mat gray(static_cast<int>(height), static_cast<int>(width), CV_8UC1);
  for (std::size_t i = 0; i < up.size(); ++i) {
    const double v = peak > 0.0 ? std::clamp(up[i] / peak, 0.0, 1.0) : 0.0;
    gray.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  cv::Mat bgr;
  cv::applyColorMap(gray, bgr, cv::COLORMAP_JET);
  Image out(height, width, 3);
  for (std::size_t i = 0; i < height * width; ++i)
    for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = bgr.data[i * 3 + (2 - c)] / 255.0;
  return out;
}

Image blend(const Image& base, const Image& overlay, double alpha) {
  if (base.height != overlay.height || base.width != overlay.width || overlay.channels != 3)
    throw InvalidInput("blend: overlay must be RGB and match the base size");
  Image out(base.height, base.width, 3);
  for (std::size_t i = 0; i < base.height * base.width; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const double b = base.pixels[i * base.channels + (base.channels == 3 ? c : 0)];
      out.pixels[i * 3 + c] = (1.0 - alpha) * b + alpha * overlay.pixels[i * 3 + c];
    }
  return out;
}

OverlayResult export_overlays(const SiameseModel& model, const std::vector<ComparisonRecord>& records,
                              const std::vector<std::string>& pair_ids, const fs::path& out_dir,
                              const OverlayOptions& options) {
  std::map<std::string, const ComparisonRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.pair_id, &r);
  const ModelConfig& mc = model.config();
  OverlayResult result;
  for (const auto& id : pair_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      result.skipped.push_back(id + ": unknown pair_id");
      continue;
    }
    const ComparisonRecord& r = *it->second;
    try {
      std::vector<std::pair<fs::path, Image>> files;
      for (const Side side : {Side::kLeft, Side::kRight}) {
        const Image src = load_image(side == Side::kLeft ? r.left_image : r.right_image);
        Image input = src;
        if (src.height != mc.image_height || src.width != mc.image_width)
          input = resize_bilinear(src, mc.image_height, mc.image_width);
        Tape tape(false);
        const EncoderOutput enc = model.encode(tape, patchify(input, mc));
        const auto attn = extract_attention(tape, enc.attention, options.source).values();
        const std::string prefix = to_string(side);
        files.emplace_back(prefix + "_original.png", src);
        files.emplace_back(prefix + "_attention.png",
                           blend(src, render_heatmap(attn, mc.grid_rows(), mc.grid_cols(), src.height, src.width),
                                 options.alpha));
        if (r.has_gaze) {
          const GazeArtifacts g = process_record_side(r, side, mc, options.gaze);
          files.emplace_back(prefix + "_gaze.png",
                             blend(src,
                                   render_heatmap(g.saliency.values, g.saliency.height, g.saliency.width, src.height,
                                                  src.width),
                                   options.alpha));
        }
      }
      fs::create_directories(out_dir / id);
      for (const auto& [name, img] : files) {
        save_png(img, out_dir / id / name);
        result.written.push_back(out_dir / id / name);
      }
    } catch (const std::exception& e) {
      result.skipped.push_back(id + ": " + e.what());
    }
  }
  return result;
}

}  // namespace gazevit
