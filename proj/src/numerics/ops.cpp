// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

namespace {

using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using Backward = std::function<void(Node&)>;

ConstMatrixMap cmap(const std::vector<Real>& v, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap mmap(std::vector<Real>& v, std::size_t rows, std::size_t cols) {
  return MatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (GradientTape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Builds the output node; when `track` is set it joins the active tape.
Tensor emit(Shape shape, std::vector<Real> value, bool track, std::initializer_list<const Tensor*> inputs,
            Backward fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (track) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->defined() ? t->node_ptr() : nullptr);
    node->backward = std::move(fn);
    GradientTape::active()->record(node);
  }
  return Tensor(std::move(node));
}

Tensor emit_many(Shape shape, std::vector<Real> value, bool track, const std::vector<Tensor>& inputs,
                 Backward fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (track) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->parents.push_back(t.node_ptr());
    node->backward = std::move(fn);
    GradientTape::active()->record(node);
  }
  return Tensor(std::move(node));
}

// Parent i when it wants a gradient, with its buffer allocated.
Node* target(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  if (p == nullptr || !p->requires_grad) return nullptr;
  p->ensure_grad();
  return p;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined() || t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         (t.defined() ? shape_string(t.shape()) : std::string("undefined")));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

std::size_t last_dim(const Tensor& t) { return t.shape().back(); }

Real sigmoid_scalar(Real x) {
  if (x >= 0) {
    Real z = std::exp(-x);
    return Real(1) / (Real(1) + z);
  }
  Real z = std::exp(x);
  return z / (Real(1) + z);
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F forward, D derivative) {
  std::vector<Real> out(a.size());
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(x[i]);
  bool track = tracking({&a});
  return emit(a.shape(), std::move(out), track, {&a}, [derivative](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        pa->grad[i] += self.grad[i] * derivative(pa->value[i], self.value[i]);
      }
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents disagree for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<Real> out(m * n);
  mmap(out, m, n).noalias() = cmap(a.node()->value, m, k) * cmap(b.node()->value, k, n);
  return emit({m, n}, std::move(out), tracking({&a, &b}), {&a, &b}, [m, k, n](Node& self) {
    auto g = cmap(self.grad, m, n);
    if (Node* pa = target(self, 0)) {
      mmap(pa->grad, m, k).noalias() += g * cmap(self.parents[1]->value, k, n).transpose();
    }
    if (Node* pb = target(self, 1)) {
      mmap(pb->grad, k, n).noalias() += cmap(self.parents[0]->value, m, k).transpose() * g;
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt: inner extents disagree for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  std::vector<Real> out(m * n);
  mmap(out, m, n).noalias() = cmap(a.node()->value, m, k) * cmap(b.node()->value, n, k).transpose();
  return emit({m, n}, std::move(out), tracking({&a, &b}), {&a, &b}, [m, k, n](Node& self) {
    auto g = cmap(self.grad, m, n);
    if (Node* pa = target(self, 0)) {
      mmap(pa->grad, m, k).noalias() += g * cmap(self.parents[1]->value, n, k);
    }
    if (Node* pb = target(self, 1)) {
      mmap(pb->grad, n, k).noalias() += g.transpose() * cmap(self.parents[0]->value, m, k);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  if (x.dim(1) != w.dim(0)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(w.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (bias.defined() && bias.size() != n) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match width " +
                         std::to_string(n));
  }
  std::vector<Real> out(m * n);
  auto y = mmap(out, m, n);
  y.noalias() = cmap(x.node()->value, m, k) * cmap(w.node()->value, k, n);
  if (bias.defined()) {
    const auto& b = bias.node()->value;
    for (std::size_t i = 0; i < m; ++i) {
      Real* row = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += b[j];
    }
  }
  return emit({m, n}, std::move(out), tracking({&x, &w, &bias}), {&x, &w, &bias}, [m, k, n](Node& self) {
    auto g = cmap(self.grad, m, n);
    if (Node* px = target(self, 0)) {
      mmap(px->grad, m, k).noalias() += g * cmap(self.parents[1]->value, k, n).transpose();
    }
    if (Node* pw = target(self, 1)) {
      mmap(pw->grad, k, n).noalias() += cmap(self.parents[0]->value, m, k).transpose() * g;
    }
    if (Node* pb = target(self, 2)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) pb->grad[j] += self.grad[i * n + j];
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<Real> out(m * n);
  mmap(out, n, m) = cmap(a.node()->value, m, n).transpose();
  return emit({n, m}, std::move(out), tracking({&a}), {&a}, [m, n](Node& self) {
    if (Node* pa = target(self, 0)) mmap(pa->grad, m, n) += cmap(self.grad, n, m).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<Real> out(a.size());
  const auto &x = a.node()->value, &y = b.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return emit(a.shape(), std::move(out), tracking({&a, &b}), {&a, &b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Node* t = target(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) t->grad[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<Real> out(a.size());
  const auto &x = a.node()->value, &y = b.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return emit(a.shape(), std::move(out), tracking({&a, &b}), {&a, &b}, [](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (Node* pb = target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<Real> out(a.size());
  const auto &x = a.node()->value, &y = b.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return emit(a.shape(), std::move(out), tracking({&a, &b}), {&a, &b}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * y[i];
    }
    if (Node* pb = target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, Real factor) {
  std::vector<Real> out(a.size());
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return emit(a.shape(), std::move(out), tracking({&a}), {&a}, [factor](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  const std::size_t n = last_dim(a);
  if (row.size() != n) {
    throw DimensionError("add_row: row " + shape_string(row.shape()) + " vs " + shape_string(a.shape()));
  }
  std::vector<Real> out(a.node()->value);
  const auto& r = row.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i % n];
  return emit(a.shape(), std::move(out), tracking({&a, &row}), {&a, &row}, [n](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (Node* pr = target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pr->grad[i % n] += self.grad[i];
    }
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  const std::size_t n = last_dim(a);
  if (row.size() != n) {
    throw DimensionError("mul_row: row " + shape_string(row.shape()) + " vs " + shape_string(a.shape()));
  }
  std::vector<Real> out(a.size());
  const auto& x = a.node()->value;
  const auto& r = row.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * r[i % n];
  return emit(a.shape(), std::move(out), tracking({&a, &row}), {&a, &row}, [n](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& r = self.parents[1]->value;
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * r[i % n];
    }
    if (Node* pr = target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pr->grad[i % n] += self.grad[i] * x[i];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, sigmoid_scalar, [](Real, Real y) { return y * (Real(1) - y); });
}

Tensor gelu(const Tensor& a) {
  const Real inv_sqrt2 = Real(0.70710678118654752440);
  const auto& x = a.node()->value;
  std::vector<Real> out(x.size()), cdf(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    cdf[i] = Real(0.5) * (Real(1) + std::erf(x[i] * inv_sqrt2));
    out[i] = x[i] * cdf[i];
  }
  return emit(a.shape(), std::move(out), tracking({&a}), {&a}, [cdf = std::move(cdf)](Node& self) {
    if (Node* pa = target(self, 0)) {
      const Real inv_sqrt2pi = Real(0.39894228040143267794);
      const auto& xin = pa->value;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const Real pdf = inv_sqrt2pi * std::exp(Real(-0.5) * xin[i] * xin[i]);
        pa->grad[i] += self.grad[i] * (cdf[i] + xin[i] * pdf);
      }
    }
  });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, [](Real x) { return x * sigmoid_scalar(x); },
      [](Real x, Real) {
        Real s = sigmoid_scalar(x);
        return s + x * s * (Real(1) - s);
      });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](Real x) { return x > 0 ? x : Real(0); }, [](Real x, Real) { return x > 0 ? Real(1) : Real(0); });
}

Tensor glu(const Tensor& a) {
  const std::size_t width = last_dim(a);
  if (width % 2 != 0) throw DimensionError("glu: last axis must be even, got " + shape_string(a.shape()));
  const std::size_t n = width / 2, rows = a.size() / width;
  Shape shape = a.shape();
  shape.back() = n;
  std::vector<Real> out(rows * n);
  const auto& x = a.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x[r * width + j] * sigmoid_scalar(x[r * width + n + j]);
  }
  return emit(std::move(shape), std::move(out), tracking({&a}), {&a}, [rows, n, width](Node& self) {
    if (Node* pa = target(self, 0)) {
      const auto& x = pa->value;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) {
          Real g = self.grad[r * n + j];
          Real lhs = x[r * width + j];
          Real s = sigmoid_scalar(x[r * width + n + j]);
          pa->grad[r * width + j] += g * s;
          pa->grad[r * width + n + j] += g * lhs * s * (Real(1) - s);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t n = last_dim(x), rows = x.size() / n;
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" + shape_string(bias.shape()) +
                         " vs input " + shape_string(x.shape()));
  }
  auto normalized = std::make_shared<std::vector<Real>>(x.size());
  auto inv_std = std::make_shared<std::vector<Real>>(rows);
  std::vector<Real> out(x.size());
  const auto& in = x.node()->value;
  const auto& g = gain.node()->value;
  const auto& b = bias.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = in.data() + r * n;
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += row[j];
    const double mu = s / static_cast<double>(n);
    double v = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = row[j] - mu;
      v += d * d;
    }
    v /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(v + eps);
    (*inv_std)[r] = static_cast<Real>(rs);
    for (std::size_t j = 0; j < n; ++j) {
      Real h = static_cast<Real>((row[j] - mu) * rs);
      (*normalized)[r * n + j] = h;
      out[r * n + j] = h * g[j] + b[j];
    }
  }
  return emit(x.shape(), std::move(out), tracking({&x, &gain, &bias}), {&x, &gain, &bias},
              [n, rows, normalized, inv_std](Node& self) {
                const auto& h = *normalized;
                const auto& g = self.parents[1]->value;
                if (Node* pg = target(self, 1)) {
                  for (std::size_t i = 0; i < self.grad.size(); ++i) pg->grad[i % n] += self.grad[i] * h[i];
                }
                if (Node* pb = target(self, 2)) {
                  for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i % n] += self.grad[i];
                }
                if (Node* px = target(self, 0)) {
                  for (std::size_t r = 0; r < rows; ++r) {
                    double mean_gh = 0, mean_ghh = 0;
                    for (std::size_t j = 0; j < n; ++j) {
                      double gh = self.grad[r * n + j] * g[j];
                      mean_gh += gh;
                      mean_ghh += gh * h[r * n + j];
                    }
                    mean_gh /= static_cast<double>(n);
                    mean_ghh /= static_cast<double>(n);
                    const double rs = (*inv_std)[r];
                    for (std::size_t j = 0; j < n; ++j) {
                      double gh = self.grad[r * n + j] * g[j];
                      px->grad[r * n + j] += static_cast<Real>(rs * (gh - mean_gh - h[r * n + j] * mean_ghh));
                    }
                  }
                }
              });
}

Tensor masked_softmax(const Tensor& logits, const Mask* mask) {
  const std::size_t n = last_dim(logits), rows = logits.size() / n;
  if (mask != nullptr && (mask->rows() != rows || mask->cols() != n)) {
    throw DimensionError("masked_softmax: mask [" + std::to_string(mask->rows()) + "x" +
                         std::to_string(mask->cols()) + "] vs logits " + shape_string(logits.shape()));
  }
  std::vector<Real> out(logits.size(), Real(0));
  const auto& x = logits.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = x.data() + r * n;
    Real* y = out.data() + r * n;
    bool any = false;
    Real hi = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !mask->allowed(r, j)) continue;
      if (!any || row[j] > hi) hi = row[j];
      any = true;
    }
    if (!any) throw DegenerateRowError("masked_softmax: row " + std::to_string(r) + " is fully masked");
    double total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !mask->allowed(r, j)) continue;
      y[j] = std::exp(row[j] - hi);
      total += y[j];
    }
    const Real inv = static_cast<Real>(1.0 / total);
    for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
  }
  return emit(logits.shape(), std::move(out), tracking({&logits}), {&logits}, [n, rows](Node& self) {
    if (Node* px = target(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const Real* y = self.value.data() + r * n;
        const Real* g = self.grad.data() + r * n;
        double dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(g[j]) * y[j];
        for (std::size_t j = 0; j < n; ++j) px->grad[r * n + j] += y[j] * (g[j] - static_cast<Real>(dot));
      }
    }
  });
}

Tensor l2_normalize_rows(const Tensor& x, Real eps) {
  const std::size_t n = last_dim(x), rows = x.size() / n;
  auto norms = std::make_shared<std::vector<Real>>(rows);
  std::vector<Real> out(x.size());
  const auto& in = x.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += static_cast<double>(in[r * n + j]) * in[r * n + j];
    Real norm = std::max(static_cast<Real>(std::sqrt(s)), eps);
    (*norms)[r] = norm;
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = in[r * n + j] / norm;
  }
  return emit(x.shape(), std::move(out), tracking({&x}), {&x}, [n, rows, norms, eps](Node& self) {
    if (Node* px = target(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const Real norm = (*norms)[r];
        const Real* y = self.value.data() + r * n;
        const Real* g = self.grad.data() + r * n;
        if (norm > eps) {
          double dot = 0;
          for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(g[j]) * y[j];
          for (std::size_t j = 0; j < n; ++j) px->grad[r * n + j] += (g[j] - y[j] * static_cast<Real>(dot)) / norm;
        } else {
          for (std::size_t j = 0; j < n; ++j) px->grad[r * n + j] += g[j] / norm;
        }
      }
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank(a, 2, "slice_cols");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (count == 0 || start + count > n) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " +
                         shape_string(a.shape()));
  }
  std::vector<Real> out(m * count);
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(x.data() + i * n + start, count, out.data() + i * count);
  }
  return emit({m, count}, std::move(out), tracking({&a}), {&a}, [m, n, start, count](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < count; ++j) pa->grad[i * n + start + j] += self.grad[i * count + j];
      }
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  const std::size_t rows = a.dim(0), inner = a.size() / rows;
  if (count == 0 || start + count > rows) {
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " +
                         shape_string(a.shape()));
  }
  Shape shape = a.shape();
  shape[0] = count;
  std::vector<Real> out(a.node()->value.begin() + static_cast<std::ptrdiff_t>(start * inner),
                        a.node()->value.begin() + static_cast<std::ptrdiff_t>((start + count) * inner));
  return emit(std::move(shape), std::move(out), tracking({&a}), {&a}, [start, inner](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[start * inner + i] += self.grad[i];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::size_t total = 0;
  bool track = false;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw DimensionError("concat_cols: row counts differ");
    total += p.dim(1);
    track = track || tracking({&p});
  }
  std::vector<Real> out(m * total);
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    widths.push_back(w);
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(p.node()->value.data() + i * w, w, out.data() + i * total + offset);
    }
    offset += w;
  }
  return emit_many({m, total}, std::move(out), track, parts, [m, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      const std::size_t w = widths[p];
      if (Node* t = target(self, p)) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < w; ++j) t->grad[i * w + j] += self.grad[i * total + off + j];
        }
      }
      off += w;
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  bool track = false;
  std::vector<Real> out;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    if (t != tail) throw DimensionError("concat_rows: trailing shapes differ");
    rows += p.dim(0);
    track = track || tracking({&p});
    out.insert(out.end(), p.node()->value.begin(), p.node()->value.end());
    sizes.push_back(p.size());
  }
  Shape shape = parts[0].shape();
  shape[0] = rows;
  return emit_many(std::move(shape), std::move(out), track, parts, [sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
      if (Node* t = target(self, p)) {
        for (std::size_t i = 0; i < sizes[p]; ++i) t->grad[i] += self.grad[off + i];
      }
      off += sizes[p];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  return emit(std::move(shape), a.node()->value, tracking({&a}), {&a}, [](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0;
  for (Real v : a.data()) s += v;
  return emit({1}, {static_cast<Real>(s)}, tracking({&a}), {&a}, [](Node& self) {
    if (Node* pa = target(self, 0)) {
      for (auto& g : pa->grad) g += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), Real(1) / static_cast<Real>(a.size())); }

Tensor weighted_sum(const Tensor& a, const Tensor& weights) {
  require_same(a, weights, "weighted_sum");
  double s = 0;
  const auto& x = a.node()->value;
  const auto& w = weights.node()->value;
  for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(x[i]) * w[i];
  return emit({1}, {static_cast<Real>(s)}, tracking({&a, &weights}), {&a, &weights}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& w = self.parents[1]->value;
    if (Node* pa = target(self, 0)) {
      for (std::size_t i = 0; i < w.size(); ++i) pa->grad[i] += self.grad[0] * w[i];
    }
    if (Node* pw = target(self, 1)) {
      for (std::size_t i = 0; i < x.size(); ++i) pw->grad[i] += self.grad[0] * x[i];
    }
  });
}

Tensor mean_row_groups(const Tensor& x, std::size_t group) {
  require_rank(x, 2, "mean_row_groups");
  if (group == 0 || x.dim(0) % group != 0) {
    throw DimensionError("mean_row_groups: " + std::to_string(x.dim(0)) + " rows not divisible by " +
                         std::to_string(group));
  }
  const std::size_t m = x.dim(0) / group, n = x.dim(1);
  const Real inv = Real(1) / static_cast<Real>(group);
  std::vector<Real> out(m * n, Real(0));
  const auto& in = x.node()->value;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t g = 0; g < group; ++g) {
      const Real* row = in.data() + (i * group + g) * n;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= inv;
  }
  return emit({m, n}, std::move(out), tracking({&x}), {&x}, [m, n, group, inv](Node& self) {
    if (Node* px = target(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t g = 0; g < group; ++g) {
          for (std::size_t j = 0; j < n; ++j) px->grad[(i * group + g) * n + j] += self.grad[i * n + j] * inv;
        }
      }
    }
  });
}

Tensor max_over_rows(const Tensor& x) {
  require_rank(x, 2, "max_over_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto& in = x.node()->value;
  std::vector<Real> out(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t i = 1; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (in[i * n + j] > out[j]) {
        out[j] = in[i * n + j];
        arg[j] = i;
      }
    }
  }
  return emit({n}, std::move(out), tracking({&x}), {&x}, [n, arg = std::move(arg)](Node& self) {
    if (Node* px = target(self, 0)) {
      for (std::size_t j = 0; j < n; ++j) px->grad[arg[j] * n + j] += self.grad[j];
    }
  });
}

Tensor affine_scalar(const Tensor& x, const Tensor& s, const Tensor& b) {
  if (s.size() != 1 || b.size() != 1) throw DimensionError("affine_scalar: scale and shift must be scalars");
  const Real sv = s[0], bv = b[0];
  const auto& in = x.node()->value;
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = sv * in[i] + bv;
  return emit(x.shape(), std::move(out), tracking({&x, &s, &b}), {&x, &s, &b}, [sv](Node& self) {
    const auto& xin = self.parents[0]->value;
    if (Node* px = target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += sv * self.grad[i];
    }
    if (Node* ps = target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ps->grad[0] += xin[i] * self.grad[i];
    }
    if (Node* pb = target(self, 2)) {
      for (Real g : self.grad) pb->grad[0] += g;
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, const Conv2dOptions& opt) {
  require_rank(x, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  const std::size_t ci = x.dim(0), fi = x.dim(1), ti = x.dim(2);
  const std::size_t co = kernels.dim(0), kf = kernels.dim(2), kt = kernels.dim(3);
  if (kernels.dim(1) != ci) {
    throw DimensionError("conv2d: kernel " + shape_string(kernels.shape()) + " vs input " + shape_string(x.shape()));
  }
  if (opt.stride_f == 0 || opt.stride_t == 0) throw ConfigError("conv2d: stride must be positive");
  if (fi + 2 * opt.pad_f < kf || ti + 2 * opt.pad_t < kt) {
    throw DimensionError("conv2d: kernel " + shape_string(kernels.shape()) + " larger than padded input " +
                         shape_string(x.shape()));
  }
  if (bias.defined() && bias.size() != co) throw DimensionError("conv2d: bias size mismatch");
  const std::size_t fo = (fi + 2 * opt.pad_f - kf) / opt.stride_f + 1;
  const std::size_t to = (ti + 2 * opt.pad_t - kt) / opt.stride_t + 1;
  const std::size_t patch = ci * kf * kt, cols = fo * to;

  // im2col: rows (c, kf, kt), columns (f_out, t_out).
  auto col = std::make_shared<std::vector<Real>>(patch * cols, Real(0));
  const auto& in = x.node()->value;
  for (std::size_t c = 0; c < ci; ++c) {
    for (std::size_t a = 0; a < kf; ++a) {
      for (std::size_t b = 0; b < kt; ++b) {
        Real* dst = col->data() + ((c * kf + a) * kt + b) * cols;
        for (std::size_t f = 0; f < fo; ++f) {
          const std::ptrdiff_t src_f = static_cast<std::ptrdiff_t>(f * opt.stride_f + a) -
                                       static_cast<std::ptrdiff_t>(opt.pad_f);
          if (src_f < 0 || src_f >= static_cast<std::ptrdiff_t>(fi)) continue;
          const Real* src = in.data() + (c * fi + static_cast<std::size_t>(src_f)) * ti;
          for (std::size_t t = 0; t < to; ++t) {
            const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t * opt.stride_t + b) -
                                         static_cast<std::ptrdiff_t>(opt.pad_t);
            if (src_t >= 0 && src_t < static_cast<std::ptrdiff_t>(ti)) dst[f * to + t] = src[src_t];
          }
        }
      }
    }
  }
  std::vector<Real> out(co * cols);
  mmap(out, co, cols).noalias() = cmap(kernels.node()->value, co, patch) * cmap(*col, patch, cols);
  if (bias.defined()) {
    const auto& bv = bias.node()->value;
    for (std::size_t o = 0; o < co; ++o) {
      for (std::size_t j = 0; j < cols; ++j) out[o * cols + j] += bv[o];
    }
  }
  const bool track = tracking({&x, &kernels, &bias});
  if (!track) col.reset();
  return emit({co, fo, to}, std::move(out), track, {&x, &kernels, &bias},
              [=](Node& self) {
                auto g = cmap(self.grad, co, cols);
                if (Node* pk = target(self, 1)) {
                  mmap(pk->grad, co, patch).noalias() += g * cmap(*col, patch, cols).transpose();
                }
                if (Node* pb = target(self, 2)) {
                  for (std::size_t o = 0; o < co; ++o) {
                    for (std::size_t j = 0; j < cols; ++j) pb->grad[o] += self.grad[o * cols + j];
                  }
                }
                if (Node* px = target(self, 0)) {
                  std::vector<Real> gcol(patch * cols);
                  mmap(gcol, patch, cols).noalias() = cmap(self.parents[1]->value, co, patch).transpose() * g;
                  for (std::size_t c = 0; c < ci; ++c) {
                    for (std::size_t a = 0; a < kf; ++a) {
                      for (std::size_t b = 0; b < kt; ++b) {
                        const Real* src = gcol.data() + ((c * kf + a) * kt + b) * cols;
                        for (std::size_t f = 0; f < fo; ++f) {
                          const std::ptrdiff_t dst_f = static_cast<std::ptrdiff_t>(f * opt.stride_f + a) -
                                                       static_cast<std::ptrdiff_t>(opt.pad_f);
                          if (dst_f < 0 || dst_f >= static_cast<std::ptrdiff_t>(fi)) continue;
                          Real* dst = px->grad.data() + (c * fi + static_cast<std::size_t>(dst_f)) * ti;
                          for (std::size_t t = 0; t < to; ++t) {
                            const std::ptrdiff_t dst_t = static_cast<std::ptrdiff_t>(t * opt.stride_t + b) -
                                                         static_cast<std::ptrdiff_t>(opt.pad_t);
                            if (dst_t >= 0 && dst_t < static_cast<std::ptrdiff_t>(ti)) dst[dst_t] += src[f * to + t];
                          }
                        }
                      }
                    }
                  }
                }
              });
}

Tensor avg_pool2d(const Tensor& x, std::size_t pool_f, std::size_t pool_t) {
  require_rank(x, 3, "avg_pool2d");
  if (pool_f == 0 || pool_t == 0) throw ConfigError("avg_pool2d: pool extents must be positive");
  const std::size_t c = x.dim(0), fi = x.dim(1), ti = x.dim(2);
  const std::size_t fo = fi / pool_f, to = ti / pool_t;
  if (fo == 0 || to == 0) throw DimensionError("avg_pool2d: pool larger than input " + shape_string(x.shape()));
  const Real inv = Real(1) / static_cast<Real>(pool_f * pool_t);
  std::vector<Real> out(c * fo * to, Real(0));
  const auto& in = x.node()->value;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t f = 0; f < fo * pool_f; ++f) {
      const Real* src = in.data() + (ch * fi + f) * ti;
      Real* dst = out.data() + (ch * fo + f / pool_f) * to;
      for (std::size_t t = 0; t < to * pool_t; ++t) dst[t / pool_t] += src[t];
    }
  }
  for (auto& v : out) v *= inv;
  return emit({c, fo, to}, std::move(out), tracking({&x}), {&x}, [=](Node& self) {
    if (Node* px = target(self, 0)) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t f = 0; f < fo * pool_f; ++f) {
          Real* dst = px->grad.data() + (ch * fi + f) * ti;
          const Real* src = self.grad.data() + (ch * fo + f / pool_f) * to;
          for (std::size_t t = 0; t < to * pool_t; ++t) dst[t] += src[t / pool_t] * inv;
        }
      }
    }
  });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  require_rank(x, 2, "depthwise_conv1d");
  require_rank(kernels, 2, "depthwise_conv1d");
  const std::size_t t_len = x.dim(0), d = x.dim(1), k = kernels.dim(0);
  if (kernels.dim(1) != d || k % 2 == 0) {
    throw DimensionError("depthwise_conv1d: kernel " + shape_string(kernels.shape()) + " vs input " +
                         shape_string(x.shape()) + " (kernel length must be odd)");
  }
  if (bias.defined() && bias.size() != d) throw DimensionError("depthwise_conv1d: bias size mismatch");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  const auto& in = x.node()->value;
  const auto& w = kernels.node()->value;
  std::vector<Real> out(t_len * d, Real(0));
  for (std::size_t t = 0; t < t_len; ++t) {
    Real* y = out.data() + t * d;
    if (bias.defined()) std::copy_n(bias.node()->value.data(), d, y);
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
      const Real* xs = in.data() + static_cast<std::size_t>(src) * d;
      const Real* ws = w.data() + j * d;
      for (std::size_t c = 0; c < d; ++c) y[c] += ws[c] * xs[c];
    }
  }
  return emit({t_len, d}, std::move(out), tracking({&x, &kernels, &bias}), {&x, &kernels, &bias},
              [t_len, d, k, half](Node& self) {
                const auto& in = self.parents[0]->value;
                const auto& w = self.parents[1]->value;
                Node* px = target(self, 0);
                Node* pk = target(self, 1);
                if (Node* pb = target(self, 2)) {
                  for (std::size_t t = 0; t < t_len; ++t) {
                    for (std::size_t c = 0; c < d; ++c) pb->grad[c] += self.grad[t * d + c];
                  }
                }
                for (std::size_t t = 0; t < t_len; ++t) {
                  const Real* g = self.grad.data() + t * d;
                  for (std::size_t j = 0; j < k; ++j) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - half;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
                    const std::size_t s = static_cast<std::size_t>(src);
                    for (std::size_t c = 0; c < d; ++c) {
                      if (px) px->grad[s * d + c] += g[c] * w[j * d + c];
                      if (pk) pk->grad[j * d + c] += g[c] * in[s * d + c];
                    }
                  }
                }
              });
}

Tensor linear_upsample(const Tensor& x, std::size_t factor) {
  require_rank(x, 2, "linear_upsample");
  if (factor == 0) throw ConfigError("linear_upsample: factor must be positive");
  const std::size_t tc = x.dim(0), d = x.dim(1), len = tc * factor;
  // Source index and fractional weight for each output row, in exact integer
  // arithmetic so that knots land exactly on source rows.
  auto lo = std::make_shared<std::vector<std::size_t>>(len);
  auto frac = std::make_shared<std::vector<Real>>(len, Real(0));
  for (std::size_t j = 0; j < len; ++j) {
    if (tc == 1 || len == 1) {
      (*lo)[j] = 0;
      continue;
    }
    const std::size_t num = j * (tc - 1), den = len - 1;
    (*lo)[j] = num / den;
    (*frac)[j] = static_cast<Real>(static_cast<double>(num % den) / static_cast<double>(den));
  }
  std::vector<Real> out(len * d);
  const auto& in = x.node()->value;
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t i0 = (*lo)[j], i1 = std::min(i0 + 1, tc - 1);
    const Real w = (*frac)[j];
    for (std::size_t c = 0; c < d; ++c) {
      const Real a = in[i0 * d + c], b = in[i1 * d + c];
      Real v = a + w * (b - a);
      out[j * d + c] = std::clamp(v, std::min(a, b), std::max(a, b));
    }
  }
  return emit({len, d}, std::move(out), tracking({&x}), {&x}, [len, d, tc, lo, frac](Node& self) {
    if (Node* px = target(self, 0)) {
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t i0 = (*lo)[j], i1 = std::min(i0 + 1, tc - 1);
        const Real w = (*frac)[j];
        for (std::size_t c = 0; c < d; ++c) {
          px->grad[i0 * d + c] += (Real(1) - w) * self.grad[j * d + c];
          px->grad[i1 * d + c] += w * self.grad[j * d + c];
        }
      }
    }
  });
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask,
                                    std::size_t heads) {
  require_rank(q, 2, "attention");
  require_rank(k, 2, "attention");
  require_rank(v, 2, "attention");
  const std::size_t d = q.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: model dimension " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (k.dim(1) != d || v.dim(1) != d || k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: q " + shape_string(q.shape()) + ", k " + shape_string(k.shape()) + ", v " +
                         shape_string(v.shape()));
  }
  if (mask && (mask->rows() != q.dim(0) || mask->cols() != k.dim(0))) {
    throw DimensionError("attention: mask does not match [Lq x Lk]");
  }
  const std::size_t hd = d / heads;
  const Real factor = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(hd)));
  if (heads == 1) {
    return matmul(masked_softmax(scale(matmul_nt(q, k), factor), mask), v);
  }
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * hd, hd);
    Tensor kh = slice_cols(k, h * hd, hd);
    Tensor vh = slice_cols(v, h * hd, hd);
    outs.push_back(matmul(masked_softmax(scale(matmul_nt(qh, kh), factor), mask), vh));
  }
  return concat_cols(outs);
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask,
                            std::size_t heads, const AttentionProjections& proj) {
  Tensor qp = linear(q, proj.wq, proj.bq);
  Tensor kp = linear(k, proj.wk, proj.bk);
  Tensor vp = linear(v, proj.wv, proj.bv);
  return linear(scaled_dot_product_attention(qp, kp, vp, mask, heads), proj.wo, proj.bo);
}

Tensor sinusoidal_encoding(std::size_t length, std::size_t dim, std::size_t offset) {
  std::vector<Real> pe(length * dim);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(p + offset) * rate;
      pe[p * dim + i] = static_cast<Real>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor::from({length, dim}, std::move(pe));
}

}  // namespace num
DASM_END_NAMESPACE
