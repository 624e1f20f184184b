// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdlib>

#include "dasm/core/errors.hpp"
#include "dasm/frontend/audio.hpp"

DASM_BEGIN_NAMESPACE

using num::Tensor;

MixedSample mixup(const MelSpectrogram& a, const MelSpectrogram& b, const Tensor& labels_a, const Tensor& labels_b,
                  double lambda) {
  if (a.values.shape() != b.values.shape()) {
    throw InputError("mixup: feature shapes " + num::shape_string(a.values.shape()) + " and " +
                     num::shape_string(b.values.shape()) + " differ");
  }
  if (labels_a.shape() != labels_b.shape()) {
    throw InputError("mixup: label shapes " + num::shape_string(labels_a.shape()) + " and " +
                     num::shape_string(labels_b.shape()) + " differ");
  }
  if (!(lambda >= 0 && lambda <= 1)) throw InputError("mixup: lambda outside [0, 1]");
  if (lambda == 1) return {a, labels_a.detach()};
  if (lambda == 0) return {b, labels_b.detach()};
  auto blend = [lambda](const Tensor& x, const Tensor& y) {
    std::vector<Real> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = static_cast<Real>(lambda * x[i] + (1 - lambda) * y[i]);
    }
    return Tensor::from(x.shape(), std::move(v));
  };
  MixedSample out{a, blend(labels_a, labels_b)};
  out.features.values = blend(a.values, b.values);
  return out;
}

double sample_mixup_lambda(std::mt19937_64& rng, double alpha) {
  std::gamma_distribution<double> g(alpha, 1.0);
  const double x = g(rng), y = g(rng);
  return x + y > 0 ? x / (x + y) : 0.5;
}

namespace {

Tensor roll_rows(const Tensor& x, long shift) {
  const std::size_t rows = x.dim(0), cols = x.size() / rows;
  const long r = static_cast<long>(rows);
  std::vector<Real> v(x.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const auto dst = static_cast<std::size_t>(((static_cast<long>(i) + shift) % r + r) % r);
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(i * cols), cols,
                v.begin() + static_cast<std::ptrdiff_t>(dst * cols));
  }
  return Tensor::from(x.shape(), std::move(v));
}

}  // namespace

ShiftedSample time_shift(const MelSpectrogram& s, const Tensor& labels, long shift) {
  const std::size_t frames = s.frames();
  if (static_cast<std::size_t>(std::labs(shift)) > frames) {
    throw InputError("time_shift: |shift| = " + std::to_string(std::labs(shift)) + " exceeds " +
                     std::to_string(frames) + " frames");
  }
  const std::size_t label_rows = labels.dim(0);
  if (label_rows == 0 || frames % label_rows != 0) {
    throw InputError("time_shift: label rows must divide the feature frame count");
  }
  const std::size_t ratio = frames / label_rows;
  if (shift % static_cast<long>(ratio) != 0) {
    throw InputError("time_shift: shift must be a multiple of " + std::to_string(ratio) + " frames");
  }
  ShiftedSample out{s, roll_rows(labels, shift / static_cast<long>(ratio))};
  out.features.values = roll_rows(s.values, shift);
  return out;
}

MelSpectrogram spec_augment(const MelSpectrogram& s, const SpecAugmentConfig& cfg, std::mt19937_64& rng,
                            num::Mask* applied) {
  const std::size_t frames = s.frames(), bins = s.values.dim(1);
  num::Mask mask(frames, bins, false);
  auto stripe = [&rng](std::size_t extent, std::size_t max_width) {
    std::uniform_int_distribution<std::size_t> width(0, std::min(max_width, extent));
    const std::size_t w = width(rng);
    std::uniform_int_distribution<std::size_t> start(0, extent - w);
    const std::size_t a = start(rng);
    return std::pair{a, a + w};
  };
  for (std::size_t i = 0; i < cfg.time_masks; ++i) {
    auto [a, b] = stripe(frames, cfg.max_time_width);
    for (std::size_t t = a; t < b; ++t) {
      for (std::size_t f = 0; f < bins; ++f) mask.set(t, f, true);
    }
  }
  for (std::size_t i = 0; i < cfg.freq_masks; ++i) {
    auto [a, b] = stripe(bins, cfg.max_freq_width);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = a; f < b; ++f) mask.set(t, f, true);
    }
  }
  double total = 0;
  for (Real v : s.values.data()) total += v;
  const auto fill = static_cast<Real>(total / static_cast<double>(s.values.size()));
  std::vector<Real> v(s.values.data().begin(), s.values.data().end());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t f = 0; f < bins; ++f) {
      if (mask.allowed(t, f)) v[t * bins + f] = fill;
    }
  }
  if (applied) *applied = mask;
  MelSpectrogram out = s;
  out.values = Tensor::from(s.values.shape(), std::move(v));
  return out;
}

DASM_END_NAMESPACE
