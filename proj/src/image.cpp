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
#include "gazevit/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace gazevit {

std::vector<double> resize_bilinear(std::span<const double> src, std::size_t src_h, std::size_t src_w,
                                    std::size_t channels, std::size_t dst_h, std::size_t dst_w) {
  std::vector<double> out(dst_h * dst_w * channels, 0.0);
  if (src_h == 0 || src_w == 0) return out;
  if (src_h == dst_h && src_w == dst_w) return {src.begin(), src.end()};
  const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
  const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
  for (std::size_t y = 0; y < dst_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
    const auto y0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < dst_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
      const auto x0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < channels; ++c) {
        auto px = [&](std::size_t yy, std::size_t xx) { return src[(yy * src_w + xx) * channels + c]; };
        const double top = px(y0, x0) * (1.0 - wx) + px(y0, x1) * wx;
        const double bottom = px(y1, x0) * (1.0 - wx) + px(y1, x1) * wx;
        out[(y * dst_w + x) * channels + c] = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& src, std::size_t dst_h, std::size_t dst_w) {
  Image out;
  out.height = dst_h;
  out.width = dst_w;
  out.channels = src.channels;
  out.pixels = resize_bilinear(src.pixels, src.height, src.width, src.channels, dst_h, dst_w);
  return out;
}

Image load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image img(static_cast<std::size_t>(rgb.rows), static_cast<std::size_t>(rgb.cols), 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    for (int x = 0; x < rgb.cols * 3; ++x)
      img.pixels[static_cast<std::size_t>(y) * img.width * 3 + static_cast<std::size_t>(x)] = row[x] / 255.0;
  }
  return img;
}

namespace {

cv::Mat to_mat(const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("PNG export supports 1 or 3 channels");
  const int type = image.channels == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat m(static_cast<int>(image.height), static_cast<int>(image.width), type);
  for (std::size_t y = 0; y < image.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        // RGB in memory, BGR for OpenCV.
        const std::size_t dst_c = image.channels == 3 ? 2 - c : c;
        const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
        row[x * image.channels + dst_c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_mat(image), buf)) throw std::runtime_error("PNG encoding failed");
  return buf;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  const auto buf = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace gazevit
