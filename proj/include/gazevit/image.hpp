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
#include <span>
#include <vector>

namespace gazevit {

/// Interleaved HWC image with values in [0, 1] (RGB channel order).
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
};

/// Bilinear resampling with pixel-center alignment (edge pixels clamped).
std::vector<double> resize_bilinear(std::span<const double> src, std::size_t src_h, std::size_t src_w,
                                    std::size_t channels, std::size_t dst_h, std::size_t dst_w);
Image resize_bilinear(const Image& src, std::size_t dst_h, std::size_t dst_w);

/// Decodes PNG/JPEG to RGB in [0, 1]. Throws std::runtime_error on failure.
Image load_image(const std::filesystem::path& path);
/// Writes an 8-bit PNG (1 or 3 channels); values are clamped to [0, 1].
void save_png(const Image& image, const std::filesystem::path& path);
/// Encodes an 8-bit PNG in memory.
std::vector<std::uint8_t> encode_png(const Image& image);

}  // namespace gazevit
