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
#include "gazevit/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace gazevit {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel_of(shape) != values.size())
    throw InvalidInput("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
  store_ = std::make_shared<Storage>();
  store_->shape = std::move(shape);
  store_->values = std::move(values);
  store_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  std::vector<double> v;
  std::size_t ncols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != ncols) throw InvalidInput("ragged matrix literal");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), ncols}, std::move(v), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!store_) throw std::logic_error("access to undefined tensor");
  return store_->shape;
}

std::size_t Tensor::numel() const { return store_ ? store_->values.size() : 0; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() < 2) return 1;
  return numel_of(Shape(s.begin(), s.end() - 1));
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<double> Tensor::data() { return {store_->values.data(), store_->values.size()}; }
std::span<const double> Tensor::data() const { return {store_->values.data(), store_->values.size()}; }

double Tensor::item() const {
  if (numel() != 1) throw InvalidInput("item() on tensor of shape " + shape_str(shape()));
  return store_->values[0];
}

bool Tensor::requires_grad() const { return store_ && store_->requires_grad; }
void Tensor::set_requires_grad(bool on) { store_->requires_grad = on; }
bool Tensor::has_grad() const { return store_ && !store_->grad.empty(); }

std::span<double> Tensor::grad() {
  if (store_->grad.size() != store_->values.size()) store_->grad.assign(store_->values.size(), 0.0);
  return {store_->grad.data(), store_->grad.size()};
}

std::span<const double> Tensor::grad() const {
  if (store_->grad.size() != store_->values.size()) store_->grad.assign(store_->values.size(), 0.0);
  return {store_->grad.data(), store_->grad.size()};
}

void Tensor::zero_grad() {
  if (store_) std::fill(store_->grad.begin(), store_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(store_->shape, store_->values, store_->requires_grad);
  return t;
}

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(Tensor output, BackwardFn fn) {
  output.set_requires_grad(true);
  entries_.push_back({std::move(output), std::move(fn)});
}

void backward(const Tensor& loss, Tape& tape) {
  if (!loss.defined() || loss.numel() != 1)
    throw InvalidInput("backward requires a scalar loss, got " +
                       (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  for (auto& e : tape.entries_) {
    auto g = e.output.grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
  Tensor root = loss;
  if (!root.requires_grad()) return;
  root.grad()[0] += 1.0;
  for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) it->fn(it->output);
}

}  // namespace gazevit
