// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "dasm/numerics/parameter.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

struct GradCheckOptions {
  double step = 1e-3;
  /// Coordinates probed per tensor; 0 probes every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences (f(θ+h) − f(θ−h)) / 2h, coordinate by coordinate. The relative
/// error uses max(|analytic|, |numeric|, 1e-8) as denominator. Throws
/// EvaluationError when f is not finite.
GradCheckReport grad_check(const std::function<Tensor()>& f, const ParameterList& params,
                           const GradCheckOptions& options = {});

}  // namespace num
DASM_END_NAMESPACE
