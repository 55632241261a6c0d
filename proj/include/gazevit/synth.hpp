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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gazevit/dataset.hpp"
#include "gazevit/gaze.hpp"

namespace gazevit {

// Planted-target task: every image holds one object patch on a noisy
// background. On the safer side the object is bright white, on the other a
// dim red. Gaze trials fixate both objects (plus the odd distractor).
struct SynthConfig {
  std::size_t pairs = 32;
  std::size_t image_size = 32;  // square images
  std::size_t patch_size = 8;   // object size; should match the model patch
  double gaze_fraction = 1.0;   // share of pairs with a gaze recording
  std::uint64_t seed = 0;
};

/// Screen used for synthetic recordings: 1920×1200, two 512×512 regions.
TrialLayout synth_layout();

struct SynthDataset {
  std::filesystem::path manifest;
  std::vector<ComparisonRecord> records;
  // Object cell (row-major patch index) per record: {left, right}.
  std::vector<std::pair<std::size_t, std::size_t>> objects;
};

/// Writes images/, gaze/<pair_id>/{trial.csv,layout.json} and manifest.csv
/// under `dir`. Labels are balanced. Deterministic in the seed.
SynthDataset generate_planted_target(const std::filesystem::path& dir, const SynthConfig& config);

}  // namespace gazevit
