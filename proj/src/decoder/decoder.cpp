// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/decoder/decoder.hpp"

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE

using namespace num;

std::string to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::TrainNoMask:
      return "train-no-mask";
    case MaskStrategy::BaseInvisibleToNovel:
      return "base-invisible";
    case MaskStrategy::BaseVisibleToNovel:
      return "base-visible";
  }
  return "?";
}

MaskStrategy parse_mask_strategy(const std::string& name) {
  if (name == "train-no-mask" || name == "none") return MaskStrategy::TrainNoMask;
  if (name == "base-invisible" || name == "invisible") return MaskStrategy::BaseInvisibleToNovel;
  if (name == "base-visible" || name == "visible") return MaskStrategy::BaseVisibleToNovel;
  throw ConfigError("unknown mask strategy '" + name + "' (expected base-visible, base-invisible, train-no-mask)");
}

Mask build_mask(std::size_t n_base, std::size_t n_novel, MaskStrategy strategy, bool novel_sees_only_self) {
  if (n_base == 0) throw ConfigError("build_mask: at least one base query is required");
  const std::size_t n = n_base + n_novel;
  Mask m(n, n, true);
  if (strategy == MaskStrategy::TrainNoMask) return m;
  for (std::size_t r = 0; r < n; ++r) {
    const bool row_base = r < n_base;
    for (std::size_t c = 0; c < n; ++c) {
      const bool col_base = c < n_base;
      bool allowed = true;
      if (row_base) {
        allowed = col_base;
      } else if (strategy == MaskStrategy::BaseInvisibleToNovel) {
        allowed = !col_base && (!novel_sees_only_self || c == r);
      }
      m.set(r, c, allowed);
    }
  }
  return m;
}

EventDecoderBlock::EventDecoderBlock(ParamFactory f, const DecoderConfig& cfg)
    : self_attn(f.sub("self_attn"), cfg.dim, cfg.heads),
      cross_attn(f.sub("cross_attn"), cfg.dim, cfg.heads),
      norm1(f.sub("norm1"), cfg.dim),
      norm2(f.sub("norm2"), cfg.dim),
      norm3(f.sub("norm3"), cfg.dim),
      ffn(f.sub("ffn"), cfg.dim, cfg.ffn_ratio, Activation::Gelu) {}

Tensor EventDecoderBlock::operator()(const Tensor& q, const Tensor& keys, const Tensor& values,
                                     const Mask* mask) const {
  Tensor h = norm1(add(q, self_attn(q, q, q, mask)));
  h = norm2(add(h, cross_attn(h, keys, values)));
  return norm3(add(h, ffn(h)));
}

EventDecoder::EventDecoder(ParamFactory f, const DecoderConfig& cfg) : cfg_(cfg) {
  for (std::size_t i = 0; i < cfg.event_blocks; ++i) blocks_.emplace_back(f.sub("block" + std::to_string(i)), cfg);
}

Tensor EventDecoder::operator()(const Tensor& queries, const Tensor& coarse, const Mask* mask) const {
  if (queries.rank() != 2 || queries.dim(1) != cfg_.dim || coarse.rank() != 2 || coarse.dim(1) != cfg_.dim) {
    throw DimensionError("event decoder: queries " + shape_string(queries.shape()) + " and features " +
                         shape_string(coarse.shape()) + " must both have " + std::to_string(cfg_.dim) + " columns");
  }
  if (mask && (mask->rows() != queries.dim(0) || mask->cols() != queries.dim(0))) {
    throw DimensionError("event decoder: mask does not match " + std::to_string(queries.dim(0)) + " queries");
  }
  Tensor keys = cfg_.cross_attention_positions ? add(coarse, sinusoidal_encoding(coarse.dim(0), cfg_.dim)) : coarse;
  Tensor q = queries;
  for (const auto& block : blocks_) q = block(q, keys, coarse, mask);
  return q;
}

ClipHead::ClipHead(ParamFactory f, std::size_t dim) : hidden(f.sub("hidden"), dim, dim), out(f.sub("out"), dim, 1) {}

Tensor ClipHead::operator()(const Tensor& refined) const {
  Tensor logits = out(gelu(hidden(refined)));
  return sigmoid(reshape(logits, {refined.dim(0)}));
}

MapHead::MapHead(ParamFactory f, std::size_t dim)
    : l1(f.sub("l1"), dim, dim), l2(f.sub("l2"), dim, dim), l3(f.sub("l3"), dim, dim) {}

Tensor MapHead::operator()(const Tensor& refined) const { return l3(gelu(l2(gelu(l1(refined))))); }

ConformerBlock::ConformerBlock(ParamFactory f, const DecoderConfig& cfg)
    : ffn1_norm(f.sub("ffn1_norm"), cfg.dim),
      attn_norm(f.sub("attn_norm"), cfg.dim),
      conv_norm(f.sub("conv_norm"), cfg.dim),
      ffn2_norm(f.sub("ffn2_norm"), cfg.dim),
      final_norm(f.sub("final_norm"), cfg.dim),
      depth_norm(f.sub("depth_norm"), cfg.dim),
      ffn1(f.sub("ffn1"), cfg.dim, cfg.ffn_ratio, Activation::Silu),
      ffn2(f.sub("ffn2"), cfg.dim, cfg.ffn_ratio, Activation::Silu),
      attn(f.sub("attn"), cfg.dim, cfg.heads),
      pointwise_in(f.sub("pointwise_in"), cfg.dim, 2 * cfg.dim),
      pointwise_out(f.sub("pointwise_out"), cfg.dim, cfg.dim) {
  if (cfg.conv_kernel % 2 == 0) throw ConfigError("conformer: convolution kernel must be odd");
  depth_kernel = f.tensor("depth_kernel", {cfg.conv_kernel, cfg.dim}, cfg.conv_kernel, cfg.conv_kernel);
  depth_bias = f.constant("depth_bias", {cfg.dim}, 0);
}

Tensor ConformerBlock::operator()(const Tensor& x, bool attention) const {
  Tensor h = add(x, scale(ffn1(ffn1_norm(x)), Real(0.5)));
  if (attention) {
    Tensor a = attn_norm(h);
    h = add(h, attn(a, a, a));
  }
  Tensor c = glu(pointwise_in(conv_norm(h)));
  c = silu(depth_norm(depthwise_conv1d(c, depth_kernel, depth_bias)));
  h = add(h, pointwise_out(c));
  h = add(h, scale(ffn2(ffn2_norm(h)), Real(0.5)));
  return final_norm(h);
}

ContextNetwork::ContextNetwork(ParamFactory f, const DecoderConfig& cfg) : cfg_(cfg) {
  for (std::size_t i = 0; i < cfg.context_blocks; ++i) blocks_.emplace_back(f.sub("block" + std::to_string(i)), cfg);
}

Tensor ContextNetwork::operator()(const Tensor& fused) const {
  Tensor z = fused;
  for (const auto& block : blocks_) z = block(z, attention_);
  return z;
}

Tensor frame_prediction(const Tensor& z, const Tensor& classifiers, const Tensor& clip, bool clip_prior) {
  if (z.rank() != 2 || classifiers.rank() != 2 || z.dim(1) != classifiers.dim(1)) {
    throw DimensionError("frame_prediction: Z " + shape_string(z.shape()) + " vs C " +
                         shape_string(classifiers.shape()));
  }
  Tensor conditional = sigmoid(matmul_nt(z, classifiers));
  if (!clip_prior) return conditional;
  if (clip.size() != classifiers.dim(0)) {
    throw DimensionError("frame_prediction: clip scores " + shape_string(clip.shape()) + " vs " +
                         std::to_string(classifiers.dim(0)) + " classes");
  }
  return mul_row(conditional, clip);
}

DASM_END_NAMESPACE
