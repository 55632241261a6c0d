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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gazevit/metrics.hpp"
#include "gazevit/train.hpp"

namespace gazevit {

enum class BenchSource { kRaw, kRollout, kBoth };
BenchSource bench_source_from_string(const std::string& name);

struct BenchOptions {
  BenchSource source = BenchSource::kBoth;
  MetricSettings metrics;
  // Evaluate at image resolution (model map bilinearly upsampled, gaze map
  // resampled from the region). EMD stays on the patch grid.
  bool pixel_mode = false;
  GazeConfig gaze;  // only used in pixel mode
};

/// Patch-level attention (length N) for one side of a pair.
using AttentionMapFn = std::function<std::vector<double>(const PreparedPair&, Side, AttentionSource)>;

/// The model's own raw/rollout maps, one encoder pass per side.
AttentionMapFn model_attention(const SiameseModel& model);

/// Per-image metrics over gaze-bearing pairs; pairs without gaze are skipped
/// with a reason. With kBoth every metric's aggregate is the better of the
/// raw and rollout means, labelled with its source.
MetricReport benchmark_attention(const SiameseModel& model, const std::vector<PreparedPair>& pairs,
                                 const BenchOptions& options);
MetricReport benchmark_maps(const std::vector<PreparedPair>& pairs, const ModelConfig& model,
                            const AttentionMapFn& map, const BenchOptions& options);

/// Colour-mapped rendering (fixed JET map) of a patch grid bilinearly
/// upsampled to height×width and scaled by its maximum.
Image render_heatmap(std::span<const double> map, std::size_t rows, std::size_t cols, std::size_t height,
                     std::size_t width);
/// (1 − alpha)·base + alpha·overlay; sizes must match.
Image blend(const Image& base, const Image& overlay, double alpha);

struct OverlayOptions {
  AttentionSource source = AttentionSource::kRaw;
  double alpha = 0.5;
  GazeConfig gaze;
};

struct OverlayResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> skipped;
};

/// For each requested pair and side writes `<pair>/<side>_original.png`,
/// `<side>_attention.png` and, with gaze, `<side>_gaze.png` at the source
/// image size. Unknown or unreadable pairs are skipped with a reason.
OverlayResult export_overlays(const SiameseModel& model, const std::vector<ComparisonRecord>& records,
                              const std::vector<std::string>& pair_ids, const std::filesystem::path& out_dir,
                              const OverlayOptions& options = {});

}  // namespace gazevit
