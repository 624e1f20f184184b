// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradGuard no_grad;
  Tensor y = f();
  const double v = y.item();
  if (!std::isfinite(v)) throw EvaluationError("grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f, const ParameterList& params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  std::vector<std::vector<Real>> analytic;
  {
    zero_grad(params);
    GradientTape tape;
    Tensor y = f();
    if (!std::isfinite(static_cast<double>(y.item()))) throw EvaluationError("grad_check: objective is not finite");
    tape.backward(y);
    for (const auto& p : params) analytic.emplace_back(p.value.grad().begin(), p.value.grad().end());
  }

  std::mt19937_64 rng(options.seed);
  const double h = options.step;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = params[pi].value;
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor != 0 && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = t.mutable_data();
    for (std::size_t i : coords) {
      const Real saved = values[i];
      values[i] = static_cast<Real>(saved + h);
      const double up = evaluate(f);
      values[i] = static_cast<Real>(saved - h);
      const double down = evaluate(f);
      values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double exact = analytic[pi].empty() ? 0.0 : static_cast<double>(analytic[pi][i]);
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double rel = std::abs(exact - numeric) / denom;
      ++report.coordinates;
      if (rel >= report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = params[pi].name;
        report.worst_index = i;
        report.analytic = exact;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace num
DASM_END_NAMESPACE
