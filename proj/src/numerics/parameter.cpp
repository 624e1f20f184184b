// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/numerics/parameter.hpp"

#include <cmath>

#include "dasm/core/hash.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const Real limit = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
  Tensor t = Tensor::uniform(std::move(shape), rng, -limit, limit);
  t.set_requires_grad(true);
  return t;
}

Tensor trainable_full(Shape shape, Real value) {
  Tensor t = Tensor::full(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

void zero_grad(const ParameterList& params) {
  for (const auto& p : params) {
    Tensor t = p.value;
    auto g = t.mutable_grad();
    std::fill(g.begin(), g.end(), Real(0));
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

void set_group_trainable(const ParameterList& params, const std::string& group, bool trainable) {
  for (const auto& p : params) {
    if (p.group == group) {
      Tensor t = p.value;
      t.set_requires_grad(trainable);
    }
  }
}

std::uint64_t parameter_hash(const ParameterList& params, const std::string& group) {
  Fnv1a h;
  for (const auto& p : params) {
    if (!group.empty() && p.group != group) continue;
    h.update(p.name);
    h.update(p.value.data().data(), p.value.size() * sizeof(Real));
  }
  return h.digest();
}

}  // namespace num
DASM_END_NAMESPACE
