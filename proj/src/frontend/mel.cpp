// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dasm/core/errors.hpp"
#include "dasm/frontend/audio.hpp"

DASM_BEGIN_NAMESPACE

void FrontendConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("frontend: sample_rate must be positive");
  if (window < 2 || hop == 0 || hop > window) throw ConfigError("frontend: need 0 < hop <= window");
  if (padding == FramePadding::Aligned && (window - hop) % 2 != 0) {
    throw ConfigError("frontend: aligned padding needs an even window - hop");
  }
  if (mel_bins == 0) throw ConfigError("frontend: mel_bins must be positive");
  if (!(f_min >= 0 && f_max > f_min && f_max <= sample_rate / 2.0)) {
    throw ConfigError("frontend: need 0 <= f_min < f_max <= Nyquist");
  }
  if (!(log_floor > 0)) throw ConfigError("frontend: log_floor must be positive");
}

std::size_t FrontendConfig::frames_for(std::size_t samples) const {
  if (samples < window) return 0;
  if (padding == FramePadding::Aligned) return samples / hop;
  return (samples - window) / hop + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> band_edges(const FrontendConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(cfg.mel_bins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.mel_bins + 1));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_band_centers(const FrontendConfig& cfg) {
  auto edges = band_edges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<std::vector<double>> mel_filterbank(const FrontendConfig& cfg) {
  cfg.validate();
  const auto edges = band_edges(cfg);
  const std::size_t bins = cfg.window / 2 + 1;
  std::vector<std::vector<double>> bank(cfg.mel_bins, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.window);
      const double w = std::min((f - l) / (c - l), (r - f) / (r - c));
      bank[m][k] = std::max(0.0, w);
    }
  }
  return bank;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

MelFrontend::MelFrontend(FrontendConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  window_ = hann_window(cfg_.window);
  bank_ = mel_filterbank(cfg_);
  for (const auto& row : bank_) {
    std::size_t first = row.size(), last = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] > 0) {
        first = std::min(first, k);
        last = k + 1;
      }
    }
    support_.emplace_back(first, std::max(first, last));
  }
  in_ = fftw_alloc_real(cfg_.window);
  auto* out = fftw_alloc_complex(cfg_.window / 2 + 1);
  out_ = out;
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(cfg_.window), in_, out, FFTW_ESTIMATE);
}

MelFrontend::~MelFrontend() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  fftw_free(in_);
  fftw_free(out_);
}

MelSpectrogram MelFrontend::operator()(const Waveform& w) {
  if (w.sample_rate != cfg_.sample_rate) {
    throw InputError("log_mel: sample rate " + std::to_string(w.sample_rate) + " Hz, expected " +
                     std::to_string(cfg_.sample_rate));
  }
  if (w.samples.size() < cfg_.window) {
    throw InputError("log_mel: waveform of " + std::to_string(w.samples.size()) + " samples is shorter than the " +
                     std::to_string(cfg_.window) + "-sample window");
  }
  const std::size_t frames = cfg_.frames_for(w.samples.size());
  const long pad = cfg_.padding == FramePadding::Aligned ? static_cast<long>((cfg_.window - cfg_.hop) / 2) : 0;
  const long n = static_cast<long>(w.samples.size());
  const std::size_t bins = cfg_.window / 2 + 1;
  auto* spectrum = static_cast<fftw_complex*>(out_);
  std::vector<double> power(bins);
  std::vector<Real> values(frames * cfg_.mel_bins);
  const double log_floor = std::log(cfg_.log_floor);
  for (std::size_t t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t * cfg_.hop) - pad;
    for (std::size_t i = 0; i < cfg_.window; ++i) {
      const long s = start + static_cast<long>(i);
      in_[i] = (s >= 0 && s < n) ? window_[i] * w.samples[static_cast<std::size_t>(s)] : 0.0;
    }
    fftw_execute(static_cast<fftw_plan>(plan_));
    for (std::size_t k = 0; k < bins; ++k) power[k] = spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1];
    for (std::size_t m = 0; m < cfg_.mel_bins; ++m) {
      double e = 0;
      for (std::size_t k = support_[m].first; k < support_[m].second; ++k) e += bank_[m][k] * power[k];
      values[t * cfg_.mel_bins + m] =
          static_cast<Real>(e > cfg_.log_floor ? std::log(e) : log_floor);
    }
  }
  MelSpectrogram out;
  out.values = num::Tensor::from({frames, cfg_.mel_bins}, std::move(values));
  out.hop_seconds = static_cast<double>(cfg_.hop) / cfg_.sample_rate;
  out.mel_bins = cfg_.mel_bins;
  return out;
}

MelSpectrogram log_mel(const Waveform& w, const FrontendConfig& cfg) {
  MelFrontend frontend(cfg);
  return frontend(w);
}

DASM_END_NAMESPACE
