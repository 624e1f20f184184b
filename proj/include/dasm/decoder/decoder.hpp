// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dasm/encoder/encoder.hpp"
#include "dasm/numerics/layers.hpp"

DASM_BEGIN_NAMESPACE

enum class MaskStrategy { TrainNoMask, BaseInvisibleToNovel, BaseVisibleToNovel };

std::string to_string(MaskStrategy s);
MaskStrategy parse_mask_strategy(const std::string& name);

/// Row = attending query, column = attended query. With `novel_sees_only_self`
/// the invisible strategy lets each novel row attend itself alone instead of
/// the whole novel block.
num::Mask build_mask(std::size_t n_base, std::size_t n_novel, MaskStrategy strategy,
                     bool novel_sees_only_self = false);

struct DecoderConfig {
  std::size_t dim = 384;
  std::size_t heads = 12;
  std::size_t ffn_ratio = 1;
  std::size_t event_blocks = 2;
  std::size_t context_blocks = 2;
  std::size_t conv_kernel = 7;
  bool cross_attention_positions = true;
};

/// Post-norm Transformer decoder block: masked self-attention over queries,
/// cross-attention into the coarse features, feed-forward.
struct EventDecoderBlock {
  num::Attention self_attn, cross_attn;
  num::LayerNorm norm1, norm2, norm3;
  num::FeedForward ffn;

  EventDecoderBlock() = default;
  EventDecoderBlock(num::ParamFactory f, const DecoderConfig& cfg);
  num::Tensor operator()(const num::Tensor& q, const num::Tensor& keys, const num::Tensor& values,
                         const num::Mask* mask) const;
};

class EventDecoder {
 public:
  EventDecoder() = default;
  EventDecoder(num::ParamFactory f, const DecoderConfig& cfg);

  /// queries [N×D], coarse [T_c×D] -> refined queries [N×D].
  num::Tensor operator()(const num::Tensor& queries, const num::Tensor& coarse, const num::Mask* mask) const;

 private:
  DecoderConfig cfg_;
  std::vector<EventDecoderBlock> blocks_;
};

/// Two-layer MLP with sigmoid output: [N×D] -> [N].
struct ClipHead {
  num::Linear hidden, out;

  ClipHead() = default;
  ClipHead(num::ParamFactory f, std::size_t dim);
  num::Tensor operator()(const num::Tensor& refined) const;
};

/// Three-layer MLP producing classifier vectors [N×D].
struct MapHead {
  num::Linear l1, l2, l3;

  MapHead() = default;
  MapHead(num::ParamFactory f, std::size_t dim);
  num::Tensor operator()(const num::Tensor& refined) const;
};

/// Conformer block: ½FFN, self-attention, convolution module, ½FFN, norm.
/// Batch normalization in the convolution module is replaced by layer
/// normalization so that single clips are processed independently.
struct ConformerBlock {
  num::LayerNorm ffn1_norm, attn_norm, conv_norm, ffn2_norm, final_norm, depth_norm;
  num::FeedForward ffn1, ffn2;
  num::Attention attn;
  num::Linear pointwise_in, pointwise_out;
  num::Tensor depth_kernel, depth_bias;

  ConformerBlock() = default;
  ConformerBlock(num::ParamFactory f, const DecoderConfig& cfg);
  num::Tensor operator()(const num::Tensor& x, bool attention) const;
};

class ContextNetwork {
 public:
  ContextNetwork() = default;
  ContextNetwork(num::ParamFactory f, const DecoderConfig& cfg);

  num::Tensor operator()(const num::Tensor& fused) const;

  /// Test hook: skips the self-attention sublayers, leaving a network whose
  /// temporal reach is the convolution radius per block.
  void set_attention_enabled(bool on) { attention_ = on; }
  std::size_t receptive_radius() const { return blocks_.size() * (cfg_.conv_kernel / 2); }

 private:
  DecoderConfig cfg_;
  std::vector<ConformerBlock> blocks_;
  bool attention_ = true;
};

/// y^fr[t,i] = sigmoid(z_t·c_i) · y_cl[i]; without the prior the product is
/// dropped.
num::Tensor frame_prediction(const num::Tensor& z, const num::Tensor& classifiers, const num::Tensor& clip,
                             bool clip_prior = true);

DASM_END_NAMESPACE
