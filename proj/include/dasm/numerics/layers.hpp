// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>

#include "dasm/numerics/ops.hpp"
#include "dasm/numerics/parameter.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

/// Creates named parameters under a path prefix and registers them.
class ParamFactory {
 public:
  ParamFactory(ParameterList& list, std::mt19937_64& rng, std::string prefix, std::string group)
      : list_(list), rng_(rng), prefix_(std::move(prefix)), group_(std::move(group)) {}

  ParamFactory sub(const std::string& name) const;
  ParamFactory with_group(const std::string& group) const;

  Tensor weight(const std::string& name, std::size_t in, std::size_t out);
  Tensor tensor(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out);
  Tensor constant(const std::string& name, Shape shape, Real value);

  std::mt19937_64& rng() { return rng_; }

 private:
  Tensor add(const std::string& name, Tensor t);

  ParameterList& list_;
  std::mt19937_64& rng_;
  std::string prefix_;
  std::string group_;
};

struct Linear {
  Tensor w, b;

  Linear() = default;
  Linear(ParamFactory f, std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
};

struct LayerNorm {
  Tensor gain, bias;

  LayerNorm() = default;
  LayerNorm(ParamFactory f, std::size_t dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

struct Attention {
  AttentionProjections proj;
  std::size_t heads = 1;

  Attention() = default;
  Attention(ParamFactory f, std::size_t dim, std::size_t heads);
  Tensor operator()(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask = nullptr) const {
    return multi_head_attention(q, k, v, mask, heads, proj);
  }
};

enum class Activation { Gelu, Silu };

/// Linear → activation → Linear with hidden width dim·ratio.
struct FeedForward {
  Linear up, down;
  Activation act = Activation::Gelu;

  FeedForward() = default;
  FeedForward(ParamFactory f, std::size_t dim, std::size_t ratio, Activation act);
  Tensor operator()(const Tensor& x) const;
};

/// Post-norm Transformer encoder block.
struct EncoderBlock {
  Attention attn;
  LayerNorm norm1, norm2;
  FeedForward ffn;

  EncoderBlock() = default;
  EncoderBlock(ParamFactory f, std::size_t dim, std::size_t heads, std::size_t ffn_ratio);
  Tensor operator()(const Tensor& x) const;
};

}  // namespace num
DASM_END_NAMESPACE
