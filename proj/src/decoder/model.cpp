// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/decoder/model.hpp"

#include <random>

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

using namespace num;

void ModelConfig::set_width(std::size_t dim, std::size_t heads, std::size_t ffn_ratio) {
  encoder.dim = decoder.dim = dim;
  encoder.heads = decoder.heads = heads;
  encoder.ffn_ratio = decoder.ffn_ratio = ffn_ratio;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (decoder.dim != encoder.dim) throw ConfigError("model: encoder and decoder widths differ");
  if (decoder.heads == 0 || decoder.dim % decoder.heads != 0) throw ConfigError("model: heads must divide dim");
  if (decoder.conv_kernel % 2 == 0) throw ConfigError("model: conformer kernel must be odd");
}

namespace {

ModelConfig checked(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

DasmModel::DasmModel(const ModelConfig& cfg) : cfg_(checked(cfg)) {
  std::mt19937_64 rng(cfg.seed);
  ParamFactory root(params_, rng, "", "head");
  encoder_ = AudioEncoder(root.sub("encoder"), cfg.encoder);
  if (cfg.ablation.event_decoder) {
    event_decoder_ = EventDecoder(root.sub("event_decoder"), cfg.decoder);
    clip_head_ = ClipHead(root.sub("clip_head"), cfg.decoder.dim);
    map_head_ = MapHead(root.sub("map_head"), cfg.decoder.dim);
  } else {
    match_scale_ = root.constant("match.scale", {1}, Real(10));
    match_bias_ = root.constant("match.bias", {1}, Real(-5));
  }
  if (cfg.ablation.context) context_ = ContextNetwork(root.sub("context"), cfg.decoder);
}

PredictionGrid DasmModel::forward(const Tensor& mel, const Tensor& queries, const Mask* mask,
                                  double mel_hop_seconds) const {
  if (queries.rank() != 2 || queries.dim(1) != cfg_.decoder.dim) {
    throw DimensionError("model: queries must be [N x " + std::to_string(cfg_.decoder.dim) + "], got " +
                         shape_string(queries.shape()));
  }
  auto enc = encoder_(mel, mel_hop_seconds);
  Tensor z = cfg_.ablation.context ? context_(enc.fused.values) : enc.fused.values;
  PredictionGrid out;
  out.frames_per_second = enc.fused.frames_per_second;
  if (!cfg_.ablation.event_decoder) {
    Tensor cosine = matmul_nt(l2_normalize_rows(z), l2_normalize_rows(queries));
    out.frame = sigmoid(affine_scalar(cosine, match_scale_, match_bias_));
    out.clip = max_over_rows(out.frame);
    return out;
  }
  Tensor refined = event_decoder_(queries, enc.coarse.values, mask);
  out.clip = clip_head_(refined);
  out.frame = frame_prediction(z, map_head_(refined), out.clip, cfg_.ablation.clip_prior);
  return out;
}

PredictionGrid DasmModel::infer(const Tensor& mel, const Tensor& queries, std::size_t n_base, MaskStrategy strategy,
                                double mel_hop_seconds) const {
  if (n_base > queries.dim(0)) throw DimensionError("model: more base queries than rows");
  Mask mask = build_mask(n_base, queries.dim(0) - n_base, strategy);
  return forward(mel, queries, &mask, mel_hop_seconds);
}

DASM_END_NAMESPACE
