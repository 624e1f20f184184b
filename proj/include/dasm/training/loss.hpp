// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dasm/decoder/model.hpp"

DASM_BEGIN_NAMESPACE

struct LossConfig {
  double alpha = 0.5;
  double gamma_pos = 0.0;
  double gamma_neg = 2.0;
  double prob_margin = 0.05;
  double clamp = 1e-7;

  void validate() const;
};

/// Mean over elements of the asymmetric focal loss
///   −y(1−p)^γ₊ ln p − (1−y) p_m^γ₋ ln(1−p_m),  p_m = max(p − margin, 0),
/// with p clamped to [clamp, 1 − clamp]. Targets are constants.
num::Tensor asymmetric_focal_loss(const num::Tensor& p, const num::Tensor& y, const LossConfig& cfg);

struct LossTerms {
  num::Tensor total;
  double frame = 0;
  double clip = 0;
};

/// Mean frame loss over T×N plus alpha times the mean clip loss over N.
/// Clip targets must be positive exactly for classes with a positive frame.
LossTerms total_loss(const PredictionGrid& pred, const num::Tensor& frame_targets, const num::Tensor& clip_targets,
                     const LossConfig& cfg);

/// ŷ^cl_i = max_t ŷ^fr_{t,i}.
num::Tensor clip_targets_from_frames(const num::Tensor& frame_targets);

DASM_END_NAMESPACE
