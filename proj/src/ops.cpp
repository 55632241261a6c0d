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
#include "gazevit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gazevit::ops {
namespace {

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// C[k×n] += A[m×k]ᵀ · B[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw InvalidInput(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

// Accumulates into `dst` grad if it participates in differentiation.
template <typename F>
void accumulate(Tensor dst, F&& f) {
  if (!dst.requires_grad()) return;
  f(dst.grad());
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw InvalidInput("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor out = Tensor::zeros(matrix_shape(m, n));
  gemm_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (tape.tracks({&a, &b})) {
    tape.record(out, [a, b, m, k, n](const Tensor& o) {
      const double* g = o.grad().data();
      accumulate(a, [&](std::span<double> da) { gemm_nt(g, b.data().data(), da.data(), m, n, k); });
      accumulate(b, [&](std::span<double> db) { gemm_tn(a.data().data(), g, db.data(), m, k, n); });
    });
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k)
    throw InvalidInput("matmul_nt: inner dimensions differ " + shape_str(a.shape()) + " x " +
                       shape_str(b.shape()) + "^T");
  Tensor out = Tensor::zeros(matrix_shape(m, n));
  gemm_nt(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (tape.tracks({&a, &b})) {
    tape.record(out, [a, b, m, k, n](const Tensor& o) {
      const double* g = o.grad().data();
      // dA = G·B, dB = Gᵀ·A
      accumulate(a, [&](std::span<double> da) { gemm_nn(g, b.data().data(), da.data(), m, n, k); });
      accumulate(b, [&](std::span<double> db) { gemm_tn(g, a.data().data(), db.data(), m, n, k); });
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(matrix_shape(n, m));
  auto x = a.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  if (tape.tracks({&a})) {
    tape.record(out, [a, m, n](const Tensor& o) {
      auto g = o.grad();
      accumulate(a, [&](std::span<double> da) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j * m + i];
      });
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.clone();
  out.set_requires_grad(false);
  auto y = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  if (tape.tracks({&a, &b})) {
    tape.record(out, [a, b](const Tensor& o) {
      auto g = o.grad();
      accumulate(a, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i]; });
      accumulate(b, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i]; });
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.clone();
  out.set_requires_grad(false);
  auto y = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  if (tape.tracks({&a, &b})) {
    tape.record(out, [a, b](const Tensor& o) {
      auto g = o.grad();
      accumulate(a, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i]; });
      accumulate(b, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i]; });
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.clone();
  out.set_requires_grad(false);
  auto y = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  if (tape.tracks({&a, &b})) {
    tape.record(out, [a, b](const Tensor& o) {
      auto g = o.grad();
      auto av = a.data();
      auto bv = b.data();
      accumulate(a, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * bv[i]; });
      accumulate(b, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * av[i]; });
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  Tensor out = a.clone();
  out.set_requires_grad(false);
  for (auto& v : out.data()) v *= factor;
  if (tape.tracks({&a})) {
    tape.record(out, [a, factor](const Tensor& o) {
      auto g = o.grad();
      accumulate(a, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * g[i]; });
    });
  }
  return out;
}

Tensor add_row(Tape& tape, const Tensor& x, const Tensor& bias) {
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.numel() != n)
    throw InvalidInput("add_row: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  Tensor out = x.clone();
  out.set_requires_grad(false);
  auto y = out.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += bv[j];
  if (tape.tracks({&x, &bias})) {
    tape.record(out, [x, bias, m, n](const Tensor& o) {
      auto g = o.grad();
      accumulate(x, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i]; });
      accumulate(bias, [&](std::span<double> d) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j];
      });
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x, int axis) {
  if (x.dim() > 2) throw InvalidInput("softmax: only 1-D and 2-D tensors are supported");
  if (axis < 0) axis += static_cast<int>(std::max<std::size_t>(x.dim(), 1));
  const std::size_t m = x.rows(), n = x.cols();
  // Iterate `groups` independent vectors of length `len` spaced by `stride`.
  std::size_t groups, len, stride, group_step;
  if (x.dim() <= 1 || axis == 1) {
    groups = m, len = n, stride = 1, group_step = n;
  } else if (axis == 0) {
    groups = n, len = m, stride = n, group_step = 1;
  } else {
    throw InvalidInput("softmax: axis out of range");
  }
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto y = out.data();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * group_step;
    double mx = -INFINITY;
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, xv[base + i * stride]);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(xv[base + i * stride] - mx);
      y[base + i * stride] = e;
      s += e;
    }
    const double inv = 1.0 / s;
    for (std::size_t i = 0; i < len; ++i) y[base + i * stride] *= inv;
  }
  if (tape.tracks({&x})) {
    tape.record(out, [x, groups, len, stride, group_step](const Tensor& o) {
      auto g = o.grad();
      auto y = o.data();
      accumulate(x, [&](std::span<double> d) {
        for (std::size_t k = 0; k < groups; ++k) {
          const std::size_t base = k * group_step;
          double dot = 0.0;
          for (std::size_t i = 0; i < len; ++i) dot += g[base + i * stride] * y[base + i * stride];
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t idx = base + i * stride;
            d[idx] += y[idx] * (g[idx] - dot);
          }
        }
      });
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (n == 0) throw InvalidInput("layer_norm: empty normalization axis");
  if (gain.numel() != n || bias.numel() != n) throw InvalidInput("layer_norm: gain/bias width mismatch");
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> xhat(m * n), inv_std(m);
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      y[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  if (tape.tracks({&x, &gain, &bias})) {
    tape.record(out, [x, gain, bias, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tensor& o) {
      auto g = o.grad();
      auto gv = gain.data();
      accumulate(x, [&](std::span<double> d) {
        std::vector<double> dxhat(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            dxhat[j] = g[i * n + j] * gv[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[i * n + j];
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j)
            d[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
        }
      });
      accumulate(gain, [&](std::span<double> d) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j] * xhat[i * n + j];
      });
      accumulate(bias, [&](std::span<double> d) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j];
      });
    });
  }
  return out;
}

Tensor gelu(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * 0.5 * std::erfc(-xv[i] * std::numbers::sqrt2 / 2.0);
  if (tape.tracks({&x})) {
    tape.record(out, [x](const Tensor& o) {
      auto g = o.grad();
      auto xv = x.data();
      accumulate(x, [&](std::span<double> d) {
        const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
        for (std::size_t i = 0; i < d.size(); ++i) {
          const double cdf = 0.5 * std::erfc(-xv[i] * std::numbers::sqrt2 / 2.0);
          const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]);
          d[i] += g[i] * (cdf + xv[i] * pdf);
        }
      });
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (tape.tracks({&x})) {
    tape.record(out, [x](const Tensor& o) {
      auto g = o.grad();
      auto xv = x.data();
      accumulate(x, [&](std::span<double> d) {
        for (std::size_t i = 0; i < d.size(); ++i)
          if (xv[i] > 0.0) d[i] += g[i];
      });
    });
  }
  return out;
}

Tensor log(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::log(xv[i]);
  if (tape.tracks({&x})) {
    tape.record(out, [x](const Tensor& o) {
      auto g = o.grad();
      auto xv = x.data();
      accumulate(x, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] / xv[i]; });
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  if (tape.tracks({&x})) {
    tape.record(out, [x](const Tensor& o) {
      const double g = o.grad()[0];
      accumulate(x, [&](std::span<double> d) { for (auto& v : d) v += g; });
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  if (x.numel() == 0) throw InvalidInput("mean of empty tensor");
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.numel()));
}

Tensor average(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw InvalidInput("average of zero tensors");
  for (const auto& t : xs) require_same_shape(xs.front(), t, "average");
  Tensor out = Tensor::zeros(xs.front().shape());
  auto y = out.data();
  const double w = 1.0 / static_cast<double>(xs.size());
  for (const auto& t : xs) {
    auto v = t.data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
  }
  for (auto& v : y) v *= w;
  bool track = false;
  for (const auto& t : xs) track = track || tape.tracks({&t});
  if (track) {
    tape.record(out, [inputs = std::vector<Tensor>(xs.begin(), xs.end()), w](const Tensor& o) {
      auto g = o.grad();
      for (const auto& t : inputs)
        accumulate(t, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += w * g[i]; });
    });
  }
  return out;
}

Tensor row_normalize(Tape& tape, const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> sums(m, 0.0);
  auto xv = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) sums[i] += xv[i * n + j];
    if (!(sums[i] > 0.0)) throw InvalidInput("row_normalize: row sum must be positive");
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = xv[i * n + j] / sums[i];
  }
  if (tape.tracks({&x})) {
    tape.record(out, [x, m, n, sums = std::move(sums)](const Tensor& o) {
      auto g = o.grad();
      auto y = o.data();
      accumulate(x, [&](std::span<double> d) {
        for (std::size_t i = 0; i < m; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
          for (std::size_t j = 0; j < n; ++j) d[i * n + j] += (g[i * n + j] - dot) / sums[i];
        }
      });
    });
  }
  return out;
}

Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.cols();
  if (begin > end || end > x.rows()) throw InvalidInput("slice_rows: range out of bounds");
  auto xv = x.data();
  Tensor out({end - begin, n}, std::vector<double>(xv.begin() + begin * n, xv.begin() + end * n));
  if (tape.tracks({&x})) {
    tape.record(out, [x, begin, n](const Tensor& o) {
      auto g = o.grad();
      accumulate(x, [&](std::span<double> d) { for (std::size_t i = 0; i < g.size(); ++i) d[begin * n + i] += g[i]; });
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t m = x.rows(), n = x.cols(), w = end - begin;
  if (begin > end || end > n) throw InvalidInput("slice_cols: range out of bounds");
  Tensor out = Tensor::zeros({m, w});
  auto xv = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.begin() + i * n + begin, w, y.begin() + i * w);
  if (tape.tracks({&x})) {
    tape.record(out, [x, m, n, w, begin](const Tensor& o) {
      auto g = o.grad();
      accumulate(x, [&](std::span<double> d) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) d[i * n + begin + j] += g[i * w + j];
      });
    });
  }
  return out;
}

Tensor concat_rows(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw InvalidInput("concat_rows of zero tensors");
  const std::size_t n = xs.front().cols();
  std::size_t m = 0;
  for (const auto& t : xs) {
    if (t.cols() != n) throw InvalidInput("concat_rows: column mismatch");
    m += t.rows();
  }
  std::vector<double> v;
  v.reserve(m * n);
  bool track = false;
  for (const auto& t : xs) {
    v.insert(v.end(), t.data().begin(), t.data().end());
    track = track || tape.tracks({&t});
  }
  Tensor out({m, n}, std::move(v));
  if (track) {
    tape.record(out, [inputs = std::vector<Tensor>(xs.begin(), xs.end())](const Tensor& o) {
      auto g = o.grad();
      std::size_t off = 0;
      for (const auto& t : inputs) {
        accumulate(t, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[off + i]; });
        off += t.numel();
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw InvalidInput("concat_cols of zero tensors");
  const std::size_t m = xs.front().rows();
  std::size_t n = 0;
  bool track = false;
  for (const auto& t : xs) {
    if (t.rows() != m) throw InvalidInput("concat_cols: row mismatch");
    n += t.cols();
    track = track || tape.tracks({&t});
  }
  Tensor out = Tensor::zeros({m, n});
  auto y = out.data();
  std::size_t off = 0;
  for (const auto& t : xs) {
    const std::size_t w = t.cols();
    auto v = t.data();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(v.begin() + i * w, w, y.begin() + i * n + off);
    off += w;
  }
  if (track) {
    tape.record(out, [inputs = std::vector<Tensor>(xs.begin(), xs.end()), m, n](const Tensor& o) {
      auto g = o.grad();
      std::size_t off = 0;
      for (const auto& t : inputs) {
        const std::size_t w = t.cols();
        accumulate(t, [&](std::span<double> d) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) d[i * w + j] += g[i * n + off + j];
        });
        off += w;
      }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw InvalidInput("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (tape.tracks({&x})) {
    tape.record(out, [x](const Tensor& o) {
      auto g = o.grad();
      accumulate(x, [&](std::span<double> d) { for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i]; });
    });
  }
  return out;
}

Tensor element(Tape& tape, const Tensor& x, std::size_t index) {
  if (index >= x.numel()) throw InvalidInput("element: index out of range");
  Tensor out = Tensor::scalar(x.data()[index]);
  if (tape.tracks({&x})) {
    tape.record(out, [x, index](const Tensor& o) {
      const double g = o.grad()[0];
      accumulate(x, [&](std::span<double> d) { d[index] += g; });
    });
  }
  return out;
}

}  // namespace gazevit::ops
