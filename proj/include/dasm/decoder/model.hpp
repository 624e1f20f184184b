// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>

#include "dasm/decoder/decoder.hpp"
#include "dasm/encoder/encoder.hpp"

DASM_BEGIN_NAMESPACE

/// Structural ablation switches; each removes one component of the full model.
struct AblationConfig {
  /// Off: frames are matched to raw queries by scaled cosine similarity and
  /// the clip score is the maximum frame score.
  bool event_decoder = true;
  /// Off: Z := E.
  bool context = true;
  /// Off: frame scores are sigmoid(z·c) without the clip factor.
  bool clip_prior = true;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  AblationConfig ablation;
  std::uint64_t seed = 0;

  /// Sets dim/heads/ffn_ratio on both halves.
  void set_width(std::size_t dim, std::size_t heads, std::size_t ffn_ratio = 1);
  void validate() const;
};

struct PredictionGrid {
  num::Tensor clip;   // [N]
  num::Tensor frame;  // [T×N]
  double frames_per_second = 50.0;
};

class DasmModel {
 public:
  explicit DasmModel(const ModelConfig& cfg);

  /// mel [frames×bins], queries [N×D]; `mask` is [N×N] or null (no masking).
  PredictionGrid forward(const num::Tensor& mel, const num::Tensor& queries, const num::Mask* mask = nullptr,
                         double mel_hop_seconds = 0.01) const;

  /// Queries are base rows first; the mask follows `strategy`.
  PredictionGrid infer(const num::Tensor& mel, const num::Tensor& queries, std::size_t n_base,
                       MaskStrategy strategy, double mel_hop_seconds = 0.01) const;

  const num::ParameterList& parameters() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  ContextNetwork& context() { return context_; }
  const AudioEncoder& encoder() const { return encoder_; }

 private:
  ModelConfig cfg_;
  num::ParameterList params_;
  AudioEncoder encoder_;
  EventDecoder event_decoder_;
  ClipHead clip_head_;
  MapHead map_head_;
  ContextNetwork context_;
  num::Tensor match_scale_, match_bias_;
};

DASM_END_NAMESPACE
