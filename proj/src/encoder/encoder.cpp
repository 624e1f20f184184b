// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/encoder/encoder.hpp"

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

using namespace num;

void EncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads != 0) throw ConfigError("encoder: heads must divide dim");
  if (dim % 4 != 0) throw ConfigError("encoder: dim must be a multiple of 4 for the 2-D positional encoding");
  if (patch_f == 0 || mel_bins % patch_f != 0) throw ConfigError("encoder: patch_f must divide mel_bins");
  if (upsample == 0 || patch_t != fine_time_pool * upsample) {
    throw ConfigError("encoder: patch_t must equal 2 x upsample so both branches meet at the fused rate");
  }
  if (cnn_blocks == 0 || cnn_channels == 0) throw ConfigError("encoder: CNN needs at least one block and channel");
}

namespace {

void require_frames(const Tensor& mel, const EncoderConfig& cfg) {
  if (mel.rank() != 2 || mel.dim(1) != cfg.mel_bins) {
    throw DimensionError("encoder: expected [frames x " + std::to_string(cfg.mel_bins) + "] input, got " +
                         shape_string(mel.shape()));
  }
  if (mel.dim(0) % cfg.patch_t != 0) {
    throw ConfigError("encoder: " + std::to_string(mel.dim(0)) + " frames not divisible by the patch extent " +
                      std::to_string(cfg.patch_t));
  }
}

// Time positions in the first half of the channels, frequency in the second.
Tensor patch_positions(std::size_t times, std::size_t freqs, std::size_t dim) {
  Tensor pt = sinusoidal_encoding(times, dim / 2);
  Tensor pf = sinusoidal_encoding(freqs, dim / 2);
  std::vector<Real> v(times * freqs * dim);
  for (std::size_t t = 0; t < times; ++t) {
    for (std::size_t f = 0; f < freqs; ++f) {
      Real* row = v.data() + (t * freqs + f) * dim;
      for (std::size_t c = 0; c < dim / 2; ++c) {
        row[c] = pt.at(t, c);
        row[dim / 2 + c] = pf.at(f, c);
      }
    }
  }
  return Tensor::from({times * freqs, dim}, std::move(v));
}

}  // namespace

CoarseEncoder::CoarseEncoder(ParamFactory f, const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t fan_in = cfg.patch_t * cfg.patch_f;
  patch_kernel_ = f.tensor("patch.kernel", {cfg.dim, 1, cfg.patch_t, cfg.patch_f}, fan_in, cfg.dim);
  patch_bias_ = f.constant("patch.bias", {cfg.dim}, 0);
  for (std::size_t i = 0; i < cfg.coarse_blocks; ++i) {
    blocks_.emplace_back(f.sub("block" + std::to_string(i)), cfg.dim, cfg.heads, cfg.ffn_ratio);
  }
}

Tensor CoarseEncoder::operator()(const Tensor& mel) const {
  require_frames(mel, cfg_);
  const std::size_t times = mel.dim(0) / cfg_.patch_t, freqs = cfg_.mel_bins / cfg_.patch_f;
  Conv2dOptions stride{cfg_.patch_t, cfg_.patch_f, 0, 0};
  // Time plays the first spatial axis, so tokens come out time-major.
  Tensor patches = conv2d(reshape(mel, {1, mel.dim(0), cfg_.mel_bins}), patch_kernel_, patch_bias_, stride);
  Tensor tokens = transpose(reshape(patches, {cfg_.dim, times * freqs}));
  tokens = add(tokens, patch_positions(times, freqs, cfg_.dim));
  for (const auto& block : blocks_) tokens = block(tokens);
  return mean_row_groups(tokens, freqs);
}

FineEncoder::FineEncoder(ParamFactory f, const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = 1, freq = cfg.mel_bins;
  for (std::size_t i = 0; i < cfg.cnn_blocks; ++i) {
    ParamFactory bf = f.sub("block" + std::to_string(i));
    Block b;
    b.kernel = bf.tensor("kernel", {cfg.cnn_channels, in, 3, 3}, in * 9, cfg.cnn_channels * 9);
    b.bias = bf.constant("bias", {cfg.cnn_channels}, 0);
    b.norm = LayerNorm(bf.sub("norm"), cfg.cnn_channels);
    b.pool_t = i == 0 ? EncoderConfig::fine_time_pool : 1;
    b.pool_f = freq >= 2 ? 2 : 1;
    freq /= b.pool_f;
    blocks_.push_back(std::move(b));
    in = cfg.cnn_channels;
  }
  out_ = Linear(f.sub("out"), cfg.cnn_channels * freq, cfg.dim);
}

std::vector<std::size_t> FineEncoder::frequency_extents() const {
  std::vector<std::size_t> e{cfg_.mel_bins};
  for (const auto& b : blocks_) e.push_back(e.back() / b.pool_f);
  return e;
}

Tensor FineEncoder::operator()(const Tensor& mel) const {
  require_frames(mel, cfg_);
  Tensor x = reshape(mel, {1, mel.dim(0), cfg_.mel_bins});
  const Conv2dOptions same{1, 1, 1, 1};
  for (const auto& b : blocks_) {
    Tensor y = conv2d(x, b.kernel, b.bias, same);
    const std::size_t c = y.dim(0), t = y.dim(1), fr = y.dim(2);
    Tensor per_cell = transpose(reshape(y, {c, t * fr}));
    y = reshape(transpose(gelu(b.norm(per_cell))), {c, t, fr});
    x = avg_pool2d(y, b.pool_t, b.pool_f);
  }
  const std::size_t c = x.dim(0), t = x.dim(1), fr = x.dim(2);
  Tensor rows = reshape(transpose(reshape(x, {c, t * fr})), {t, fr * c});
  return out_(rows);
}

Tensor fuse(const Tensor& fine, const Tensor& coarse, std::size_t factor) {
  if (fine.rank() != 2 || coarse.rank() != 2 || fine.dim(1) != coarse.dim(1) ||
      fine.dim(0) != coarse.dim(0) * factor) {
    throw DimensionError("fuse: fine " + shape_string(fine.shape()) + " incompatible with coarse " +
                         shape_string(coarse.shape()) + " at factor " + std::to_string(factor));
  }
  return add(fine, linear_upsample(coarse, factor));
}

AudioEncoder::AudioEncoder(ParamFactory f, const EncoderConfig& cfg)
    : cfg_(cfg),
      coarse_(f.sub("coarse").with_group("backbone"), cfg),
      fine_(f.sub("fine"), cfg) {}

AudioEncoder::Output AudioEncoder::operator()(const Tensor& mel, double mel_hop_seconds) const {
  Output out;
  out.coarse.values = coarse_(mel);
  out.coarse.frames_per_second = 1.0 / (mel_hop_seconds * static_cast<double>(cfg_.patch_t));
  out.fused.values = fuse(fine_(mel), out.coarse.values, cfg_.upsample);
  out.fused.frames_per_second = 1.0 / (mel_hop_seconds * EncoderConfig::fine_time_pool);
  return out;
}

DASM_END_NAMESPACE
