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

#include <span>
#include <vector>

#include "gazevit/tensor.hpp"

// Differentiable operations. Every op takes the tape it records onto first;
// an op is recorded only when the tape is recording and at least one input
// requires a gradient. Matrix ops treat 1-D tensors as a single row.
namespace gazevit::ops {

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// a · bᵀ without materializing the transpose.
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
/// x[m×n] + bias[n] broadcast over rows.
Tensor add_row(Tape& tape, const Tensor& x, const Tensor& bias);

/// Softmax along `axis` of a 1-D or 2-D tensor (axis -1 means last).
Tensor softmax(Tape& tape, const Tensor& x, int axis = -1);
/// Per-row normalization with population variance, then gain/bias.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-6);
/// Exact x·Φ(x).
Tensor gelu(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
/// Element-wise mean of equally shaped tensors.
Tensor average(Tape& tape, std::span<const Tensor> xs);
/// Divides every row by its sum.
Tensor row_normalize(Tape& tape, const Tensor& x);

Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(Tape& tape, std::span<const Tensor> xs);
Tensor concat_cols(Tape& tape, std::span<const Tensor> xs);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
/// Scalar view of one flat element.
Tensor element(Tape& tape, const Tensor& x, std::size_t index);

}  // namespace gazevit::ops
