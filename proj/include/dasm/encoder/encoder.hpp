// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "dasm/numerics/layers.hpp"

DASM_BEGIN_NAMESPACE

struct EncoderConfig {
  std::size_t mel_bins = 64;
  std::size_t dim = 384;
  std::size_t heads = 12;
  std::size_t ffn_ratio = 1;
  /// Coarse patch extent in mel frames; must equal 2 · upsample.
  std::size_t patch_t = 8;
  std::size_t patch_f = 16;
  std::size_t coarse_blocks = 2;
  std::size_t upsample = 4;
  std::size_t cnn_blocks = 4;
  std::size_t cnn_channels = 16;

  void validate() const;
  /// Mel frames consumed per coarse frame.
  std::size_t frames_per_coarse() const { return patch_t; }
  /// Mel frames per fused (fine) frame.
  static constexpr std::size_t fine_time_pool = 2;
};

struct CoarseFeatures {
  num::Tensor values;  // [T_c×D]
  double frames_per_second = 12.5;
};

struct FusedFeatures {
  num::Tensor values;  // [T×D]
  double frames_per_second = 50.0;
};

/// Attention-based low-resolution branch. Parameters belong to the
/// "backbone" group.
class CoarseEncoder {
 public:
  CoarseEncoder() = default;
  CoarseEncoder(num::ParamFactory f, const EncoderConfig& cfg);

  /// mel [frames×bins] -> [frames/patch_t × D].
  num::Tensor operator()(const num::Tensor& mel) const;

 private:
  EncoderConfig cfg_;
  num::Tensor patch_kernel_, patch_bias_;
  std::vector<num::EncoderBlock> blocks_;
};

/// Convolutional high-resolution branch: conv3x3 → channel norm → GELU →
/// average pooling, repeated; the first block halves time.
class FineEncoder {
 public:
  FineEncoder() = default;
  FineEncoder(num::ParamFactory f, const EncoderConfig& cfg);

  /// mel [frames×bins] -> [frames/2 × D].
  num::Tensor operator()(const num::Tensor& mel) const;

  /// Frequency extent after every block, starting from the mel bins.
  std::vector<std::size_t> frequency_extents() const;

 private:
  struct Block {
    num::Tensor kernel, bias;
    num::LayerNorm norm;
    std::size_t pool_t = 1, pool_f = 1;
  };
  EncoderConfig cfg_;
  std::vector<Block> blocks_;
  num::Linear out_;
};

/// E = fine + Upsample(coarse).
num::Tensor fuse(const num::Tensor& fine, const num::Tensor& coarse, std::size_t factor);

class AudioEncoder {
 public:
  AudioEncoder() = default;
  AudioEncoder(num::ParamFactory f, const EncoderConfig& cfg);

  struct Output {
    CoarseFeatures coarse;
    FusedFeatures fused;
  };
  Output operator()(const num::Tensor& mel, double mel_hop_seconds = 0.01) const;

  const CoarseEncoder& coarse() const { return coarse_; }
  const FineEncoder& fine() const { return fine_; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  CoarseEncoder coarse_;
  FineEncoder fine_;
};

DASM_END_NAMESPACE
