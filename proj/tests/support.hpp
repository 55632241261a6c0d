// Shared test helpers: central finite differences and small generators.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gazevit/random.hpp"
#include "gazevit/tensor.hpp"

namespace gazevit::testing {

/// |a − n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// turning round-off into huge relative errors.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of `f` w.r.t. every element of `param`, perturbing in
/// place and restoring.
inline std::vector<double> numeric_grad(Tensor param, const std::function<double()>& f, double step = 1e-4) {
  std::vector<double> out(param.numel());
  auto v = param.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double orig = v[i];
    v[i] = orig + step;
    const double up = f();
    v[i] = orig - step;
    const double down = f();
    v[i] = orig;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

inline double max_rel_err(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, rel_err(analytic[i], numeric[i]));
  return worst;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0, bool requires_grad = true) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = rng.normal() * scale;
  return t;
}

/// Random strictly positive probability vector.
inline std::vector<double> random_distribution(Rng& rng, std::size_t n, double floor = 1e-3) {
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) s += (v = rng.uniform() + floor);
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace gazevit::testing
