// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dasm/core/events.hpp"
#include "dasm/frontend/audio.hpp"
#include "dasm/training/labels.hpp"

DASM_BEGIN_NAMESPACE

enum class SoundKind { Tone, Chirp, NoiseBand, AmTone };

/// Tone: f0. Chirp: linear sweep f0 → f1. NoiseBand: flat spectrum on
/// [f0, f1]. AmTone: carrier f0 gated by a raised-sine envelope at mod_hz.
struct SoundRecipe {
  SoundKind kind = SoundKind::Tone;
  double f0 = 440;
  double f1 = 440;
  double mod_hz = 0;

  /// Frequency range holding the sound's energy.
  std::pair<double, double> band() const;
};

struct SyntheticClass {
  std::string name;
  std::string parent;                 // empty for roots
  std::optional<SoundRecipe> recipe;  // set exactly for leaves
  double weight = 1.0;                // relative draw probability (leaves)
};

struct SyntheticSpec {
  std::vector<SyntheticClass> classes;
  double clip_seconds = 10.0;
  int sample_rate = 16000;
  int min_events = 1;
  int max_events = 4;
  double min_duration = 0.3;
  double max_duration = 2.0;
  double min_snr_db = 6.0;
  double max_snr_db = 20.0;
  double noise_rms = 0.01;

  void validate() const;
  Ontology ontology() const;
  std::vector<std::string> leaf_classes() const;
  const SyntheticClass& find(const std::string& name) const;
};

std::vector<std::string> default_rare_leaves();

/// 20 classes in three levels: tonal/noisy roots, four mid-level families and
/// fourteen leaves. Leaves named in `rare` get draw weight `rare_weight`.
SyntheticSpec default_synthetic_spec(const std::vector<std::string>& rare = default_rare_leaves(),
                                     double rare_weight = 0.1);

struct PlannedEvent {
  std::string class_id;
  double onset = 0;
  double offset = 0;
  double snr_db = 10;
};

struct SyntheticClip {
  Waveform audio;
  EventRoster events;  // leaf classes only
  std::vector<PlannedEvent> plan;
  /// Peak-limiting factor applied to the whole mix.
  double gain = 1.0;
};

/// Renders the given events over a white noise floor. Event power relative to
/// the noise floor power equals the event's SNR; the clip is rescaled (all
/// components alike) if its peak would exceed 0.99.
SyntheticClip render_synthetic_clip(const SyntheticSpec& spec, const std::vector<PlannedEvent>& plan,
                                    std::mt19937_64& rng, const std::string& clip_id = "clip");

/// Draws 1..4 (per spec) events: class by weight, duration, onset and SNR
/// uniformly, then renders them.
SyntheticClip generate_synthetic_clip(const SyntheticSpec& spec, std::mt19937_64& rng,
                                      const std::string& clip_id = "clip");

/// Ratio in dB of the mean mel-band power inside the event's band over the
/// frames fully covered by the event, to the expected noise-floor power in the
/// same bands. Returns nullopt when the event covers no whole frame.
std::optional<double> band_excess_db(const SyntheticClip& clip, std::size_t event_index, const SyntheticSpec& spec,
                                     const FrontendConfig& frontend = {});

/// Binary [frames×classes] targets; frame k covers [k/fps, (k+1)/fps) and is
/// positive when an event of the class overlaps it by a positive amount.
num::Tensor frame_targets(const EventRoster& events, const std::vector<std::string>& classes, std::size_t frames,
                          double frames_per_second);

DASM_END_NAMESPACE
