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
#include <span>
#include <string>
#include <vector>

#include "gazevit/image.hpp"
#include "gazevit/tensor.hpp"

namespace gazevit {

struct GazeSample {
  double t_ms = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool valid = true;
};

struct FixationEvent {
  double x = 0.0;  // centroid, screen px
  double y = 0.0;
  double duration_ms = 0.0;
  double onset_ms = 0.0;
};

struct Rect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool contains(double px, double py) const { return px >= x && px < x + width && py >= y && py < y + height; }
};

enum class Side { kLeft, kRight };
const char* to_string(Side side);

/// Screen arrangement and viewing geometry of one recording session.
struct TrialLayout {
  std::size_t screen_width = 1920;
  std::size_t screen_height = 1200;
  Rect left_region;
  Rect right_region;
  double viewing_distance_cm = 50.0;
  double monitor_diagonal_in = 24.0;
  // Native panel resolution used for the pixel pitch; defaults to the screen.
  std::size_t resolution_width = 1920;
  std::size_t resolution_height = 1200;

  const Rect& region(Side side) const { return side == Side::kLeft ? left_region : right_region; }
  /// Throws InvalidInput if regions overlap or leave the screen.
  void validate() const;
};

enum class NormState { kRawMass, kProbability };

/// Non-negative map, row-major, `width` columns by `height` rows.
struct SaliencyGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
  NormState norm = NormState::kRawMass;

  SaliencyGrid() = default;
  SaliencyGrid(std::size_t w, std::size_t h, NormState state = NormState::kRawMass)
      : width(w), height(h), values(w * h, 0.0), norm(state) {}
  /// Builds a grid from explicit values; throws if the size is wrong.
  static SaliencyGrid from(std::size_t w, std::size_t h, std::vector<double> values,
                           NormState state = NormState::kRawMass);

  double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
  std::size_t size() const { return values.size(); }
  double total() const;
  /// Copy scaled to unit mass (uniform if the mass is zero).
  SaliencyGrid normalized() const;
  SaliencyGrid transposed() const;
};

enum class FixationWeighting { kDuration, kUnit };

/// I-DT (dispersion-threshold) detection. A window is a run of consecutive
/// valid samples; it becomes a fixation when (max x − min x) + (max y − min y)
/// stays within `dispersion_px` and its time span reaches `min_duration_ms`.
std::vector<FixationEvent> detect_fixations(std::span<const GazeSample> samples, double dispersion_px,
                                            double min_duration_ms);

/// Discrete fixation map over `region` (pixel grid of the region size);
/// fixations outside the region are dropped.
SaliencyGrid build_fixation_map(std::span<const FixationEvent> fixations, const TrialLayout& layout, Side side,
                                FixationWeighting weighting = FixationWeighting::kDuration);

/// Pixels spanned by one degree of visual angle for the layout's geometry.
double sigma_from_geometry(const TrialLayout& layout);

/// Isotropic Gaussian convolution, kernel truncated at 3σ and normalized to
/// unit mass; zero padding beyond the borders.
SaliencyGrid smooth(const SaliencyGrid& map, double sigma_px);

/// Model patch layout the gaze maps are pooled onto.
struct PatchGrid {
  std::size_t image_height = 64;
  std::size_t image_width = 64;
  std::size_t rows = 8;
  std::size_t cols = 8;

  std::size_t cells() const { return rows * cols; }
};

/// Bilinear resize to the model resolution, average-pool per patch, then
/// ε-floor and renormalize to a probability grid of rows×cols cells.
SaliencyGrid to_patch_distribution(const SaliencyGrid& map, const PatchGrid& grid, double eps = 1e-8);

/// Binary rows×cols grid marking patches that contain ≥1 fixation centroid.
SaliencyGrid fixation_cells(std::span<const FixationEvent> fixations, const TrialLayout& layout, Side side,
                            const PatchGrid& grid);

struct GazeConfig {
  double dispersion_px = 0.0;  // 0 → one degree of visual angle
  double min_duration_ms = 100.0;
  double sigma_px = 0.0;       // 0 → derived from geometry
  FixationWeighting weighting = FixationWeighting::kDuration;
  double eps = 1e-8;
};

/// Everything derived from one side of one trial.
struct GazeArtifacts {
  std::vector<FixationEvent> fixations;  // inside the region, screen px
  SaliencyGrid saliency;                 // region resolution, raw mass
  SaliencyGrid patch_distribution;       // Ĝ, probability
  SaliencyGrid fixation_points;          // patch-resolution binary map
};

GazeArtifacts process_gaze(std::span<const GazeSample> samples, const TrialLayout& layout, Side side,
                           const GazeConfig& config, const PatchGrid& grid);

// File formats.
std::vector<GazeSample> read_gaze_csv(const std::filesystem::path& path);
void write_gaze_csv(std::span<const GazeSample> samples, const std::filesystem::path& path);
TrialLayout read_layout(const std::filesystem::path& path);
void write_layout(const TrialLayout& layout, const std::filesystem::path& path);

/// "SGRD" magic, u16 version, u16 norm flag, u32 width, u32 height, then
/// row-major little-endian f32 values.
void write_sgrd(const SaliencyGrid& grid, const std::filesystem::path& path);
SaliencyGrid read_sgrd(const std::filesystem::path& path);
/// Grayscale rendering scaled so the maximum maps to 255.
Image saliency_to_image(const SaliencyGrid& grid);

}  // namespace gazevit
