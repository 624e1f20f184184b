// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <utility>
#include <vector>

#include "dasm/numerics/tensor.hpp"

DASM_BEGIN_NAMESPACE

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Log-power mel grid; `values` is [frames×mel_bins].
struct MelSpectrogram {
  num::Tensor values;
  double hop_seconds = 0.01;
  std::size_t mel_bins = 0;

  std::size_t frames() const { return values.dim(0); }
};

enum class FramePadding {
  /// (win − hop)/2 zeros on each side, so frames = floor(len / hop) and frame
  /// k is centred on sample (k + ½)·hop.
  Aligned,
  /// No padding: frames = floor((len − win) / hop) + 1.
  None,
};

struct FrontendConfig {
  int sample_rate = 16000;
  std::size_t window = 1024;
  std::size_t hop = 160;
  std::size_t mel_bins = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-10;
  FramePadding padding = FramePadding::Aligned;

  void validate() const;
  std::size_t frames_for(std::size_t samples) const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centre frequency in Hz of each triangular band.
std::vector<double> mel_band_centers(const FrontendConfig& cfg);

/// HTK-style triangular filterbank [mel_bins × (window/2 + 1)], unnormalized
/// (peak weight 1).
std::vector<std::vector<double>> mel_filterbank(const FrontendConfig& cfg);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Reusable STFT + mel projection. Holds an FFTW plan; not thread-safe.
class MelFrontend {
 public:
  explicit MelFrontend(FrontendConfig cfg);
  ~MelFrontend();
  MelFrontend(const MelFrontend&) = delete;
  MelFrontend& operator=(const MelFrontend&) = delete;

  MelSpectrogram operator()(const Waveform& w);
  const FrontendConfig& config() const { return cfg_; }

 private:
  FrontendConfig cfg_;
  std::vector<double> window_;
  std::vector<std::vector<double>> bank_;
  std::vector<std::pair<std::size_t, std::size_t>> support_;
  double* in_ = nullptr;
  void* out_ = nullptr;
  void* plan_ = nullptr;
};

MelSpectrogram log_mel(const Waveform& w, const FrontendConfig& cfg = {});

// Augmentations.

struct MixedSample {
  MelSpectrogram features;
  num::Tensor labels;
};

/// λ·(a, labels_a) + (1 − λ)·(b, labels_b).
MixedSample mixup(const MelSpectrogram& a, const MelSpectrogram& b, const num::Tensor& labels_a,
                  const num::Tensor& labels_b, double lambda);

/// Draw for the mixup coefficient, Beta(alpha, alpha).
double sample_mixup_lambda(std::mt19937_64& rng, double alpha = 0.2);

struct ShiftedSample {
  MelSpectrogram features;
  num::Tensor labels;
};

/// Circular shift by `shift` feature frames. `labels` is [L×N] with L dividing
/// the feature frame count; it moves by shift·L/frames rows, which must be an
/// integer. |shift| may equal the frame count (identity).
ShiftedSample time_shift(const MelSpectrogram& s, const num::Tensor& labels, long shift);

struct SpecAugmentConfig {
  std::size_t time_masks = 2;
  std::size_t max_time_width = 20;
  std::size_t freq_masks = 2;
  std::size_t max_freq_width = 8;
};

/// Replaces random time and frequency stripes with the spectrogram mean. When
/// `applied` is given it receives the union of masked cells [frames×bins].
MelSpectrogram spec_augment(const MelSpectrogram& s, const SpecAugmentConfig& cfg, std::mt19937_64& rng,
                            num::Mask* applied = nullptr);

// 16-bit PCM WAV.

Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

DASM_END_NAMESPACE
