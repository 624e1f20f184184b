// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "dasm/numerics/tensor.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

/// A trainable tensor with a stable name path and a parameter group (e.g.
/// "backbone"). The tensor handle aliases the model's storage.
struct Parameter {
  std::string name;
  Tensor value;
  std::string group;
};

using ParameterList = std::vector<Parameter>;

/// Leaf tensor that records gradients, Glorot-uniform initialized for a
/// fan_in → fan_out map.
Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
/// Leaf tensor filled with `value` that records gradients.
Tensor trainable_full(Shape shape, Real value);

/// Allocates every gradient buffer and sets it to exactly 0.
void zero_grad(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);
/// Enables or disables gradient recording for all parameters of `group`.
void set_group_trainable(const ParameterList& params, const std::string& group, bool trainable);
/// FNV-1a hash over names and raw values; detects any value change.
std::uint64_t parameter_hash(const ParameterList& params, const std::string& group = {});

}  // namespace num
DASM_END_NAMESPACE
