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

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazevit {

using Shape = std::vector<std::size_t>;

/// Thrown when an operation receives arguments that violate its contract
/// (shape mismatch, bad label, non-positive geometry, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major double array with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape hand gradients back to parameters. Use clone() for a deep
/// copy. A default-constructed Tensor is empty and holds no storage.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// 2-D tensor from nested rows; all rows must have the same length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(store_); }
  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t dim() const { return shape().size(); }
  /// Rows/cols view: 1-D tensors are a single row, scalars are 1x1.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;
  double& at(std::size_t r, std::size_t c) { return data()[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer; allocated (zero-filled) on first access.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  Tensor clone() const;
  /// Same storage identity.
  bool same(const Tensor& other) const { return store_ == other.store_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> store_;
};

/// Ordered record of the differentiable operations executed in one forward
/// pass. Entries are appended in execution order, so reverse order is a valid
/// topological order for the backward sweep.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& output)>;

  /// A non-recording tape makes every op a plain forward computation.
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return recording_; }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// True when an op over `inputs` must be recorded.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  void record(Tensor output, BackwardFn fn);

 private:
  friend void backward(const Tensor& loss, Tape& tape);

  struct Entry {
    Tensor output;
    BackwardFn fn;
  };
  bool recording_;
  std::vector<Entry> entries_;
};

/// Populates dLoss/dLeaf in every requires_grad leaf reachable through the
/// tape. Intermediate gradients are reset on each call; leaf gradients
/// accumulate across calls until zero_grad().
void backward(const Tensor& loss, Tape& tape);

}  // namespace gazevit
