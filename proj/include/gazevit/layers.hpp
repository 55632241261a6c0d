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

#include <string>
#include <utility>
#include <vector>

#include "gazevit/ops.hpp"
#include "gazevit/random.hpp"

namespace gazevit {

constexpr double kInitStd = 0.02;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;

/// Fully connected layer y = x·W + b with W stored [in × out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng) : weight(Tensor::zeros({in, out}, true)), bias(Tensor::zeros({out}, true)) {
    for (auto& w : weight.data()) w = rng.truncated_normal(kInitStd);
  }

  Tensor operator()(Tape& tape, const Tensor& x) const { return ops::add_row(tape, ops::matmul(tape, x, weight), bias); }

  void collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-6;

  LayerNorm() = default;
  LayerNorm(std::size_t width, double eps_) : gain(Tensor::full({width}, 1.0, true)), bias(Tensor::zeros({width}, true)), eps(eps_) {}

  Tensor operator()(Tape& tape, const Tensor& x) const { return ops::layer_norm(tape, x, gain, bias, eps); }

  void collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".bias", bias});
  }
};

}  // namespace gazevit
