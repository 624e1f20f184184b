// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <map>
#include <numbers>

#include "dasm/core/errors.hpp"
#include "dasm/frontend/audio.hpp"

using namespace dasm;
using num::Tensor;

namespace {

Waveform sine(double hz, std::size_t n, double amp = 0.5) {
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / 16000));
  }
  return w;
}

Waveform noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = u(rng);
  return w;
}

// Direct O(N²) DFT with its own window, mel scale and triangles.
std::vector<std::vector<double>> naive_log_mel(const Waveform& w, const FrontendConfig& cfg) {
  const std::size_t n = cfg.window, bins = n / 2 + 1;
  auto mel = [](double f) { return 1127.0 * std::log(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::exp(m / 1127.0) - 1.0); };
  std::vector<double> pts(cfg.mel_bins + 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = inv(mel(cfg.f_min) + (mel(cfg.f_max) - mel(cfg.f_min)) * static_cast<double>(i) /
                                      static_cast<double>(cfg.mel_bins + 1));
  }
  const long pad = static_cast<long>((cfg.window - cfg.hop) / 2);
  const std::size_t frames = w.samples.size() / cfg.hop;
  std::vector<std::vector<double>> out(frames, std::vector<double>(cfg.mel_bins));
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> power(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const long s = static_cast<long>(t * cfg.hop + i) - pad;
        if (s < 0 || s >= static_cast<long>(w.samples.size())) continue;
        const double hann = std::pow(std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)), 2);
        acc += hann * w.samples[static_cast<std::size_t>(s)] *
               std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
      }
      power[k] = std::norm(acc);
    }
    for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
      double e = 0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * 16000.0 / static_cast<double>(n);
        double tri = 0;
        if (f > pts[m] && f <= pts[m + 1]) tri = (f - pts[m]) / (pts[m + 1] - pts[m]);
        if (f > pts[m + 1] && f < pts[m + 2]) tri = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
        e += tri * power[k];
      }
      out[t][m] = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

}  // namespace

TEST(LogMel, MatchesDirectDft) {
  FrontendConfig cfg;
  cfg.window = 256;
  cfg.hop = 64;
  cfg.mel_bins = 16;
  Waveform w = noise(1024, 3);
  auto mel = log_mel(w, cfg);
  auto ref = naive_log_mel(w, cfg);
  ASSERT_EQ(mel.frames(), ref.size());
  for (std::size_t t = 0; t < ref.size(); ++t) {
    for (std::size_t m = 0; m < cfg.mel_bins; ++m) EXPECT_NEAR(mel.values.at(t, m), ref[t][m], 1e-4);
  }
}

TEST(LogMel, SineAtBandCentreWinsItsBand) {
  FrontendConfig cfg;
  const auto centres = mel_band_centers(cfg);
  for (std::size_t band : {8u, 20u, 33u, 47u, 60u}) {
    auto mel = log_mel(sine(centres[band], 8000), cfg);
    for (std::size_t t = 3; t + 3 < mel.frames(); ++t) {
      std::size_t best = 0;
      for (std::size_t m = 1; m < cfg.mel_bins; ++m) {
        if (mel.values.at(t, m) > mel.values.at(t, best)) best = m;
      }
      EXPECT_EQ(best, band) << "frame " << t;
    }
  }
}

TEST(LogMel, SilenceIsTheFloor) {
  Waveform w;
  w.samples.assign(4000, 0.0f);
  auto mel = log_mel(w);
  EXPECT_EQ(mel.frames(), 25u);
  for (Real v : mel.values.data()) EXPECT_EQ(v, static_cast<Real>(std::log(1e-10)));
}

TEST(LogMel, FramingArithmetic) {
  Waveform w = noise(16000, 5);
  Waveform twice = w;
  twice.samples.insert(twice.samples.end(), w.samples.begin(), w.samples.end());
  const auto a = log_mel(w).frames(), b = log_mel(twice).frames();
  EXPECT_LE(std::abs(static_cast<long>(b) - 2 * static_cast<long>(a)), 1);
  FrontendConfig plain;
  plain.padding = FramePadding::None;
  EXPECT_EQ(log_mel(w, plain).frames(), (16000u - 1024u) / 160u + 1u);
}

TEST(LogMel, ShiftByOneHopShiftsOneFrame) {
  Waveform w = noise(8000, 9);
  Waveform shifted;
  shifted.samples.assign(160, 0.0f);
  shifted.samples.insert(shifted.samples.end(), w.samples.begin(), w.samples.end() - 160);
  auto a = log_mel(w), b = log_mel(shifted);
  for (std::size_t t = 4; t + 8 < a.frames(); ++t) {
    for (std::size_t m = 0; m < 64; ++m) EXPECT_NEAR(b.values.at(t + 1, m), a.values.at(t, m), 1e-5);
  }
}

TEST(LogMel, Errors) {
  EXPECT_THROW(log_mel(noise(1000, 1)), InputError);
  Waveform w = noise(2000, 1);
  w.sample_rate = 44100;
  EXPECT_THROW(log_mel(w), InputError);
  FrontendConfig bad;
  bad.hop = 0;
  EXPECT_THROW(log_mel(noise(2000, 1), bad), ConfigError);
}

TEST(LogMel, Deterministic) {
  Waveform w = noise(5000, 2);
  auto a = log_mel(w), b = log_mel(w);
  EXPECT_TRUE(std::equal(a.values.data().begin(), a.values.data().end(), b.values.data().begin()));
}

namespace {

MelSpectrogram grid(std::size_t frames, std::size_t bins, Real base) {
  std::vector<Real> v(frames * bins);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = base + static_cast<Real>(i);
  return {Tensor::from({frames, bins}, std::move(v)), 0.01, bins};
}

}  // namespace

TEST(Mixup, Endpoints) {
  auto a = grid(4, 3, 0), b = grid(4, 3, 100);
  Tensor la = Tensor::full({2, 5}, 1), lb = Tensor::zeros({2, 5});
  auto one = mixup(a, b, la, lb, 1.0);
  auto zero = mixup(a, b, la, lb, 0.0);
  EXPECT_TRUE(std::equal(one.features.values.data().begin(), one.features.values.data().end(), a.values.data().begin()));
  EXPECT_TRUE(std::equal(one.labels.data().begin(), one.labels.data().end(), la.data().begin()));
  EXPECT_TRUE(std::equal(zero.features.values.data().begin(), zero.features.values.data().end(), b.values.data().begin()));
  EXPECT_TRUE(std::equal(zero.labels.data().begin(), zero.labels.data().end(), lb.data().begin()));
}

TEST(Mixup, MidpointAndErrors) {
  MelSpectrogram a{Tensor::from({1, 1}, {2}), 0.01, 1}, b{Tensor::from({1, 1}, {4}), 0.01, 1};
  auto m = mixup(a, b, Tensor::from({1}, {1}), Tensor::from({1}, {0}), 0.5);
  EXPECT_EQ(m.features.values[0], 3.0f);
  EXPECT_EQ(m.labels[0], 0.5f);
  EXPECT_THROW(mixup(grid(2, 2, 0), grid(3, 2, 0), Tensor::zeros({1}), Tensor::zeros({1}), 0.5), InputError);
}

TEST(Mixup, BetaDrawsInUnitInterval) {
  std::mt19937_64 rng(1);
  double total = 0;
  for (int i = 0; i < 4000; ++i) {
    const double l = sample_mixup_lambda(rng);
    ASSERT_GE(l, 0.0);
    ASSERT_LE(l, 1.0);
    total += l;
  }
  EXPECT_NEAR(total / 4000, 0.5, 0.03);
}

TEST(TimeShift, Examples) {
  auto s = grid(40, 2, 0);
  Tensor labels = Tensor::zeros({40, 1});
  for (std::size_t t = 10; t < 20; ++t) labels.mutable_data()[t] = 1;
  for (long shift : {0L, 40L, -40L}) {
    auto r = time_shift(s, labels, shift);
    EXPECT_TRUE(std::equal(r.features.values.data().begin(), r.features.values.data().end(), s.values.data().begin()));
  }
  auto r = time_shift(s, labels, 5);
  for (std::size_t t = 0; t < 40; ++t) EXPECT_EQ(r.labels[t], (t >= 15 && t < 25) ? 1.0f : 0.0f);
  EXPECT_THROW(time_shift(s, labels, 41), InputError);
  Tensor coarse = Tensor::zeros({20, 1});
  EXPECT_THROW(time_shift(s, coarse, 3), InputError);
  EXPECT_EQ(time_shift(s, coarse, 4).labels.dim(0), 20u);
}

TEST(TimeShift, PreservesMultisets) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    MelSpectrogram s{Tensor::randn({30, 4}, rng), 0.01, 4};
    Tensor labels = Tensor::zeros({30, 3});
    std::bernoulli_distribution on(0.3);
    for (auto& v : labels.mutable_data()) v = on(rng) ? 1.0f : 0.0f;
    const long shift = static_cast<long>(trial) - 10;
    auto r = time_shift(s, labels, shift);
    std::vector<Real> a(s.values.data().begin(), s.values.data().end());
    std::vector<Real> b(r.features.values.data().begin(), r.features.values.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    for (std::size_t c = 0; c < 3; ++c) {
      double before = 0, after = 0;
      for (std::size_t t = 0; t < 30; ++t) {
        before += labels.at(t, c);
        after += r.labels.at(t, c);
      }
      EXPECT_EQ(before, after);
    }
  }
}

TEST(SpecAugment, ZeroMasksIsIdentity) {
  std::mt19937_64 rng(3);
  auto s = grid(10, 4, 0);
  auto r = spec_augment(s, {0, 5, 0, 2}, rng);
  EXPECT_TRUE(std::equal(r.values.data().begin(), r.values.data().end(), s.values.data().begin()));
}

TEST(SpecAugment, FullWidthFrequencyMaskIsMean) {
  auto s = grid(10, 4, 0);
  double mean = 0;
  for (Real v : s.values.data()) mean += v;
  mean /= 40;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    num::Mask applied;
    auto r = spec_augment(s, {0, 0, 1, 4}, rng, &applied);
    std::size_t masked_bands = 0;
    for (std::size_t f = 0; f < 4; ++f) {
      if (!applied.allowed(0, f)) continue;
      ++masked_bands;
      for (std::size_t t = 0; t < 10; ++t) EXPECT_FLOAT_EQ(r.values.at(t, f), static_cast<float>(mean));
    }
    if (masked_bands == 4) {
      for (Real v : r.values.data()) EXPECT_FLOAT_EQ(v, static_cast<float>(mean));
    }
  }
}

TEST(SpecAugment, MaskedCountMatchesUnionAndUnmaskedUnchanged) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    MelSpectrogram s{Tensor::randn({50, 16}, rng), 0.01, 16};
    num::Mask applied;
    auto r = spec_augment(s, {3, 12, 2, 6}, rng, &applied);
    // Rebuild the union from the stripe structure: a row is a time stripe when
    // every cell is masked, a column likewise.
    std::vector<bool> rows(50), cols(16);
    for (std::size_t t = 0; t < 50; ++t) {
      bool all = true;
      for (std::size_t f = 0; f < 16; ++f) all = all && applied.allowed(t, f);
      rows[t] = all;
    }
    for (std::size_t f = 0; f < 16; ++f) {
      bool all = true;
      for (std::size_t t = 0; t < 50; ++t) all = all && applied.allowed(t, f);
      cols[f] = all;
    }
    const auto nr = static_cast<std::size_t>(std::count(rows.begin(), rows.end(), true));
    const auto nc = static_cast<std::size_t>(std::count(cols.begin(), cols.end(), true));
    std::size_t masked = 0, changed_outside = 0;
    for (std::size_t t = 0; t < 50; ++t) {
      for (std::size_t f = 0; f < 16; ++f) {
        if (applied.allowed(t, f)) {
          ++masked;
        } else if (r.values.at(t, f) != s.values.at(t, f)) {
          ++changed_outside;
        }
      }
    }
    EXPECT_EQ(masked, nr * 16 + nc * 50 - nr * nc);
    EXPECT_EQ(changed_outside, 0u);
  }
}

TEST(Wav, RoundTrip) {
  Waveform w;
  for (int i = -5; i < 5; ++i) w.samples.push_back(static_cast<float>(i * 3277) / 32768.0f);
  w.samples.push_back(-1.0f);
  const auto path = std::filesystem::temp_directory_path() / "dasm_wav_roundtrip.wav";
  write_wav(path, w);
  Waveform r = read_wav(path);
  EXPECT_EQ(r.sample_rate, 16000);
  EXPECT_EQ(r.samples, w.samples);
  std::filesystem::remove(path);
  EXPECT_THROW(read_wav(path), InputError);
}
