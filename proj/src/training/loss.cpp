// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/training/loss.hpp"

#include <algorithm>
#include <cmath>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

using namespace num;

void LossConfig::validate() const {
  if (!(alpha >= 0)) throw ConfigError("loss: alpha must be non-negative");
  if (!(gamma_pos >= 0 && gamma_neg >= 0)) throw ConfigError("loss: focusing exponents must be non-negative");
  if (!(prob_margin >= 0 && prob_margin < 1)) throw ConfigError("loss: prob_margin must lie in [0, 1)");
  if (!(clamp > 0 && clamp < 0.5)) throw ConfigError("loss: clamp must lie in (0, 0.5)");
}

namespace {

// x^g with the convention 0^0 = 1.
double power(double x, double g) { return g == 0 ? 1.0 : std::pow(x, g); }

// d/dx x^g, zero for g = 0.
double power_slope(double x, double g) { return g == 0 ? 0.0 : g * std::pow(x, g - 1); }

}  // namespace

Tensor asymmetric_focal_loss(const Tensor& p, const Tensor& y, const LossConfig& cfg) {
  if (p.shape() != y.shape()) {
    throw DimensionError("focal loss: prediction " + shape_string(p.shape()) + " vs target " +
                         shape_string(y.shape()));
  }
  const std::size_t n = p.size();
  const double lo = cfg.clamp, hi = 1 - cfg.clamp, m = cfg.prob_margin;
  const double gp = cfg.gamma_pos, gn = cfg.gamma_neg;
  std::vector<Real> slope(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = p[i], t = y[i];
    const double pc = std::clamp(raw, lo, hi);
    const double pm = std::max(pc - m, 0.0);
    const double pos = -t * power(1 - pc, gp) * std::log(pc);
    const double neg = -(1 - t) * power(pm, gn) * std::log1p(-pm);
    total += pos + neg;
    double d = -t * (-power_slope(1 - pc, gp) * std::log(pc) + power(1 - pc, gp) / pc);
    if (pc > m) d += -(1 - t) * (power_slope(pm, gn) * std::log1p(-pm) - power(pm, gn) / (1 - pm));
    const bool inside = raw > lo && raw < hi;
    slope[i] = inside ? static_cast<Real>(d / static_cast<double>(n)) : Real(0);
  }
  const auto value = static_cast<Real>(total / static_cast<double>(n));
  Tensor out = Tensor::scalar(value);
  if (GradientTape::active() && p.requires_grad()) {
    Node& node = *out.node();
    node.requires_grad = true;
    node.parents.push_back(p.node_ptr());
    node.backward = [slope = std::move(slope)](Node& self) {
      Node* parent = self.parents[0].get();
      if (!parent->requires_grad) return;
      parent->ensure_grad();
      const Real g = self.grad[0];
      for (std::size_t i = 0; i < slope.size(); ++i) parent->grad[i] += g * slope[i];
    };
    GradientTape::active()->record(out.node_ptr());
  }
  return out;
}

Tensor clip_targets_from_frames(const Tensor& frame_targets) {
  const std::size_t t = frame_targets.dim(0), n = frame_targets.dim(1);
  std::vector<Real> clip(n, Real(0));
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < n; ++c) clip[c] = std::max(clip[c], frame_targets.at(r, c));
  }
  return Tensor::from({n}, std::move(clip));
}

LossTerms total_loss(const PredictionGrid& pred, const Tensor& frame_targets, const Tensor& clip_targets,
                     const LossConfig& cfg) {
  if (frame_targets.shape() != pred.frame.shape() || clip_targets.shape() != pred.clip.shape()) {
    throw DimensionError("total_loss: targets " + shape_string(frame_targets.shape()) + "/" +
                         shape_string(clip_targets.shape()) + " vs predictions " + shape_string(pred.frame.shape()) +
                         "/" + shape_string(pred.clip.shape()));
  }
  const Tensor derived = clip_targets_from_frames(frame_targets);
  for (std::size_t i = 0; i < derived.size(); ++i) {
    if ((clip_targets[i] > 0) != (derived[i] > 0)) {
      throw ValidationError("total_loss: clip target of class " + std::to_string(i) +
                            " disagrees with its frame targets");
    }
  }
  Tensor frame = asymmetric_focal_loss(pred.frame, frame_targets, cfg);
  Tensor clip = asymmetric_focal_loss(pred.clip, clip_targets, cfg);
  LossTerms out;
  out.frame = frame.item();
  out.clip = clip.item();
  out.total = cfg.alpha == 0 ? frame : add(frame, scale(clip, static_cast<Real>(cfg.alpha)));
  return out;
}

DASM_END_NAMESPACE
