// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/numerics/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

namespace {
thread_local GradientTape* g_active_tape = nullptr;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), Real(0)); }

Tensor Tensor::full(Shape shape, Real value) {
  auto node = std::make_shared<Node>();
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  node->value.assign(shape_size(shape), value);
  node->shape = std::move(shape);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, Real stddev) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(dist(rng));
  return from(std::move(shape), std::move(v));
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, Real lo, Real hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(dist(rng));
  return from(std::move(shape), std::move(v));
}

Real Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

Tensor Tensor::detach() const { return from(shape(), node_->value); }

GradientTape::GradientTape() : previous_(g_active_tape) { g_active_tape = this; }

GradientTape::~GradientTape() { g_active_tape = previous_; }

GradientTape* GradientTape::active() { return g_active_tape; }

void GradientTape::record(std::shared_ptr<Node> node) { nodes_.push_back(std::move(node)); }

void GradientTape::backward(const Tensor& loss, Real seed) {
  if (!loss.defined() || loss.size() != 1) throw DimensionError("backward requires a scalar loss");
  Node* root = loss.node();
  if (!root->requires_grad) return;
  root->ensure_grad();
  root->grad[0] += seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n);
  }
  // Interior gradients are spent; leaves keep theirs for the optimizer.
  for (auto& n : nodes_) {
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

bool Mask::all_allowed() const {
  return std::all_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

}  // namespace num
DASM_END_NAMESPACE
