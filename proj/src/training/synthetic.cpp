// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/training/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFadeSeconds = 0.01;
constexpr int kNoiseComponents = 64;

std::vector<double> synthesize(const SoundRecipe& r, std::size_t n, int rate, std::mt19937_64& rng) {
  std::vector<double> x(n);
  const double dur = static_cast<double>(n) / rate;
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  const double phi = phase(rng);
  switch (r.kind) {
    case SoundKind::Tone:
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(kTwoPi * r.f0 * i / rate + phi);
      break;
    case SoundKind::Chirp:
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        x[i] = std::sin(kTwoPi * (r.f0 * t + (r.f1 - r.f0) * t * t / (2.0 * dur)) + phi);
      }
      break;
    case SoundKind::NoiseBand: {
      std::uniform_real_distribution<double> freq(r.f0, r.f1);
      for (int c = 0; c < kNoiseComponents; ++c) {
        const double f = freq(rng), p = phase(rng);
        for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(kTwoPi * f * i / rate + p);
      }
      break;
    }
    case SoundKind::AmTone: {
      const double mphi = phase(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        x[i] = std::sin(kTwoPi * r.f0 * t + phi) * (0.5 - 0.5 * std::cos(kTwoPi * r.mod_hz * t + mphi));
      }
      break;
    }
  }
  const auto fade = std::min<std::size_t>(static_cast<std::size_t>(kFadeSeconds * rate), n / 2);
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * (i + 0.5) / fade);
    x[i] *= g;
    x[n - 1 - i] *= g;
  }
  double sq = 0;
  for (double v : x) sq += v * v;
  const double rms = std::sqrt(sq / static_cast<double>(n));
  if (rms > 0) {
    for (double& v : x) v /= rms;
  }
  return x;
}

}  // namespace

std::pair<double, double> SoundRecipe::band() const {
  switch (kind) {
    case SoundKind::Tone: return {f0, f0};
    case SoundKind::Chirp:
    case SoundKind::NoiseBand: return {std::min(f0, f1), std::max(f0, f1)};
    case SoundKind::AmTone: return {f0 - mod_hz, f0 + mod_hz};
  }
  return {f0, f0};
}

void SyntheticSpec::validate() const {
  if (classes.empty()) throw ConfigError("synthetic spec: no classes");
  if (!(clip_seconds > 0) || sample_rate <= 0) throw ConfigError("synthetic spec: bad clip length or sample rate");
  if (min_events < 0 || max_events < min_events) throw ConfigError("synthetic spec: bad event count range");
  if (!(min_duration > 0) || max_duration < min_duration) throw ConfigError("synthetic spec: bad duration range");
  if (max_duration > clip_seconds) throw ConfigError("synthetic spec: events longer than the clip cannot be placed");
  if (max_snr_db < min_snr_db) throw ConfigError("synthetic spec: bad SNR range");
  if (!(noise_rms >= 0)) throw ConfigError("synthetic spec: negative noise level");
  const double nyquist = sample_rate / 2.0;
  for (const auto& c : classes) {
    if (c.recipe) {
      auto [lo, hi] = c.recipe->band();
      if (!(lo > 0 && hi < nyquist)) throw ConfigError("synthetic spec: class '" + c.name + "' outside (0, Nyquist)");
      if (!(c.weight > 0)) throw ConfigError("synthetic spec: class '" + c.name + "' needs positive weight");
    }
  }
  auto ont = ontology();
  for (const auto& leaf : ont.leaves()) {
    if (!find(leaf).recipe) throw ConfigError("synthetic spec: leaf '" + leaf + "' has no sound recipe");
  }
  for (const auto& c : classes) {
    if (c.recipe && std::find(ont.leaves().begin(), ont.leaves().end(), c.name) == ont.leaves().end()) {
      throw ConfigError("synthetic spec: inner class '" + c.name + "' must not have a recipe");
    }
  }
}

Ontology SyntheticSpec::ontology() const {
  Ontology ont;
  for (const auto& c : classes) ont.add(c.name, c.parent.empty() ? std::vector<std::string>{} : std::vector{c.parent});
  ont.validate();
  return ont;
}

std::vector<std::string> SyntheticSpec::leaf_classes() const {
  std::vector<std::string> out;
  for (const auto& c : classes) {
    if (c.recipe) out.push_back(c.name);
  }
  return out;
}

const SyntheticClass& SyntheticSpec::find(const std::string& name) const {
  for (const auto& c : classes) {
    if (c.name == name) return c;
  }
  throw ConfigError("synthetic spec: unknown class '" + name + "'");
}

std::vector<std::string> default_rare_leaves() { return {"tone_1300", "chirp_down", "noise_mid", "am_fast"}; }

SyntheticSpec default_synthetic_spec(const std::vector<std::string>& rare, double rare_weight) {
  using K = SoundKind;
  SyntheticSpec spec;
  auto inner = [&](std::string name, std::string parent) { spec.classes.push_back({std::move(name), std::move(parent), std::nullopt, 1.0}); };
  auto leaf = [&](std::string name, std::string parent, SoundRecipe r) {
    const double w = std::find(rare.begin(), rare.end(), name) != rare.end() ? rare_weight : 1.0;
    spec.classes.push_back({std::move(name), std::move(parent), r, w});
  };
  inner("tonal", "");
  inner("noisy", "");
  inner("steady_tone", "tonal");
  inner("sweep", "tonal");
  inner("pulsed", "tonal");
  inner("noise_band", "noisy");
  leaf("tone_300", "steady_tone", {K::Tone, 300, 300, 0});
  leaf("tone_500", "steady_tone", {K::Tone, 500, 500, 0});
  leaf("tone_800", "steady_tone", {K::Tone, 800, 800, 0});
  leaf("tone_1300", "steady_tone", {K::Tone, 1300, 1300, 0});
  leaf("tone_2000", "steady_tone", {K::Tone, 2000, 2000, 0});
  leaf("tone_3200", "steady_tone", {K::Tone, 3200, 3200, 0});
  leaf("chirp_up_low", "sweep", {K::Chirp, 300, 900, 0});
  leaf("chirp_up_high", "sweep", {K::Chirp, 1500, 3500, 0});
  leaf("chirp_down", "sweep", {K::Chirp, 2500, 700, 0});
  leaf("noise_low", "noise_band", {K::NoiseBand, 150, 500, 0});
  leaf("noise_mid", "noise_band", {K::NoiseBand, 1000, 1800, 0});
  leaf("noise_high", "noise_band", {K::NoiseBand, 3500, 6000, 0});
  leaf("am_slow", "pulsed", {K::AmTone, 1000, 1000, 4});
  leaf("am_fast", "pulsed", {K::AmTone, 2600, 2600, 12});
  spec.validate();
  return spec;
}

SyntheticClip render_synthetic_clip(const SyntheticSpec& spec, const std::vector<PlannedEvent>& plan,
                                    std::mt19937_64& rng, const std::string& clip_id) {
  const int rate = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds * rate));
  std::vector<double> mix(n);
  std::normal_distribution<double> noise(0.0, spec.noise_rms);
  for (auto& v : mix) v = spec.noise_rms > 0 ? noise(rng) : 0.0;

  SyntheticClip clip;
  clip.plan = plan;
  for (const auto& ev : plan) {
    const auto& cls = spec.find(ev.class_id);
    if (!cls.recipe) throw ConfigError("synthetic clip: class '" + ev.class_id + "' is not a leaf");
    if (!(ev.onset >= 0 && ev.onset < ev.offset && ev.offset <= spec.clip_seconds + 1e-9)) {
      throw ConfigError("synthetic clip: event '" + ev.class_id + "' does not fit in the clip");
    }
    const auto start = static_cast<std::size_t>(std::llround(ev.onset * rate));
    const auto stop = std::min(n, static_cast<std::size_t>(std::llround(ev.offset * rate)));
    if (stop <= start) continue;
    auto x = synthesize(*cls.recipe, stop - start, rate, rng);
    const double level = (spec.noise_rms > 0 ? spec.noise_rms : 0.01) * std::pow(10.0, ev.snr_db / 20.0);
    for (std::size_t i = 0; i < x.size(); ++i) mix[start + i] += level * x[i];
    clip.events.push_back(Event{clip_id, ev.class_id, ev.onset, ev.offset, std::nullopt});
  }
  double peak = 0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  clip.gain = peak > 0.99 ? 0.99 / peak : 1.0;
  clip.audio.sample_rate = rate;
  clip.audio.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) clip.audio.samples[i] = static_cast<float>(mix[i] * clip.gain);
  return clip;
}

SyntheticClip generate_synthetic_clip(const SyntheticSpec& spec, std::mt19937_64& rng, const std::string& clip_id) {
  spec.validate();
  std::vector<const SyntheticClass*> leaves;
  std::vector<double> weights;
  for (const auto& c : spec.classes) {
    if (c.recipe) {
      leaves.push_back(&c);
      weights.push_back(c.weight);
    }
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_int_distribution<int> count(spec.min_events, spec.max_events);
  std::uniform_real_distribution<double> dur(spec.min_duration, spec.max_duration);
  std::uniform_real_distribution<double> snr(spec.min_snr_db, spec.max_snr_db);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PlannedEvent> plan;
  const int k = count(rng);
  for (int i = 0; i < k; ++i) {
    PlannedEvent ev;
    ev.class_id = leaves[pick(rng)]->name;
    const double d = dur(rng);
    // Times on a 1 ms grid keep rosters short and exact.
    ev.onset = std::floor(unit(rng) * (spec.clip_seconds - d) * 1000.0) / 1000.0;
    ev.offset = std::round((ev.onset + d) * 1000.0) / 1000.0;
    ev.offset = std::min(ev.offset, spec.clip_seconds);
    ev.snr_db = snr(rng);
    plan.push_back(ev);
  }
  return render_synthetic_clip(spec, plan, rng, clip_id);
}

std::optional<double> band_excess_db(const SyntheticClip& clip, std::size_t event_index, const SyntheticSpec& spec,
                                     const FrontendConfig& frontend) {
  const auto& ev = clip.plan.at(event_index);
  const auto& recipe = spec.find(ev.class_id).recipe.value();
  const auto mel = log_mel(clip.audio, frontend);
  const auto bank = mel_filterbank(frontend);
  const auto window = hann_window(frontend.window);
  double w2 = 0;
  for (double w : window) w2 += w * w;

  const double bin_hz = static_cast<double>(frontend.sample_rate) / frontend.window;
  auto [lo, hi] = recipe.band();
  lo -= bin_hz;
  hi += bin_hz;
  std::vector<std::size_t> bands;
  std::vector<double> floor_power;
  const double sigma = spec.noise_rms * clip.gain;
  for (std::size_t m = 0; m < bank.size(); ++m) {
    double in_band = 0, total = 0;
    for (std::size_t k = 0; k < bank[m].size(); ++k) {
      total += bank[m][k];
      const double f = k * bin_hz;
      if (f >= lo && f <= hi) in_band += bank[m][k];
    }
    if (in_band > 0) {
      bands.push_back(m);
      floor_power.push_back(sigma * sigma * w2 * total);
    }
  }
  if (bands.empty()) return std::nullopt;

  // Frame k's window spans [(k + 1/2)·hop − window/2, (k + 1/2)·hop + window/2).
  const double hop_s = static_cast<double>(frontend.hop) / frontend.sample_rate;
  const double half_s = static_cast<double>(frontend.window) / 2.0 / frontend.sample_rate;
  double measured = 0;
  std::size_t frames = 0;
  for (std::size_t t = 0; t < mel.frames(); ++t) {
    const double centre = (t + 0.5) * hop_s;
    if (centre - half_s < ev.onset || centre + half_s > ev.offset) continue;
    for (auto m : bands) measured += std::exp(static_cast<double>(mel.values.at(t, m)));
    ++frames;
  }
  if (frames == 0) return std::nullopt;
  measured /= static_cast<double>(frames);
  double expected_floor = 0;
  for (double p : floor_power) expected_floor += p;
  return 10.0 * std::log10(measured / expected_floor);
}

num::Tensor frame_targets(const EventRoster& events, const std::vector<std::string>& classes, std::size_t frames,
                          double frames_per_second) {
  std::vector<Real> y(frames * classes.size(), Real(0));
  for (const auto& e : events) {
    auto it = std::find(classes.begin(), classes.end(), e.class_id);
    if (it == classes.end()) continue;
    const auto c = static_cast<std::size_t>(it - classes.begin());
    const auto first = static_cast<long>(std::floor(e.onset * frames_per_second));
    for (long k = std::max(0L, first); k < static_cast<long>(frames); ++k) {
      const double start = k / frames_per_second;
      if (start >= e.offset) break;
      if ((k + 1) / frames_per_second > e.onset) y[k * classes.size() + c] = Real(1);
    }
  }
  return num::Tensor::from({frames, classes.size()}, std::move(y));
}

DASM_END_NAMESPACE
