// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dasm/numerics/layers.hpp"

#include "dasm/core/errors.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

ParamFactory ParamFactory::sub(const std::string& name) const {
  return ParamFactory(list_, rng_, prefix_.empty() ? name : prefix_ + "." + name, group_);
}

ParamFactory ParamFactory::with_group(const std::string& group) const {
  return ParamFactory(list_, rng_, prefix_, group);
}

Tensor ParamFactory::add(const std::string& name, Tensor t) {
  const std::string full = prefix_.empty() ? name : prefix_ + "." + name;
  for (const auto& p : list_) {
    if (p.name == full) throw ConfigError("duplicate parameter name " + full);
  }
  list_.push_back({full, t, group_});
  return t;
}

Tensor ParamFactory::weight(const std::string& name, std::size_t in, std::size_t out) {
  return add(name, glorot({in, out}, in, out, rng_));
}

Tensor ParamFactory::tensor(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out) {
  return add(name, glorot(std::move(shape), fan_in, fan_out, rng_));
}

Tensor ParamFactory::constant(const std::string& name, Shape shape, Real value) {
  return add(name, trainable_full(std::move(shape), value));
}

Linear::Linear(ParamFactory f, std::size_t in, std::size_t out)
    : w(f.weight("w", in, out)), b(f.constant("b", {out}, 0)) {}

LayerNorm::LayerNorm(ParamFactory f, std::size_t dim)
    : gain(f.constant("gain", {dim}, 1)), bias(f.constant("bias", {dim}, 0)) {}

Attention::Attention(ParamFactory f, std::size_t dim, std::size_t heads_) : heads(heads_) {
  if (heads == 0 || dim % heads != 0) throw ConfigError("attention: heads must divide the model dimension");
  proj.wq = f.weight("wq", dim, dim);
  proj.bq = f.constant("bq", {dim}, 0);
  proj.wk = f.weight("wk", dim, dim);
  proj.bk = f.constant("bk", {dim}, 0);
  proj.wv = f.weight("wv", dim, dim);
  proj.bv = f.constant("bv", {dim}, 0);
  proj.wo = f.weight("wo", dim, dim);
  proj.bo = f.constant("bo", {dim}, 0);
}

FeedForward::FeedForward(ParamFactory f, std::size_t dim, std::size_t ratio, Activation act_)
    : up(f.sub("up"), dim, dim * ratio), down(f.sub("down"), dim * ratio, dim), act(act_) {
  if (ratio == 0) throw ConfigError("feed-forward expansion ratio must be positive");
}

Tensor FeedForward::operator()(const Tensor& x) const {
  Tensor h = up(x);
  return down(act == Activation::Gelu ? gelu(h) : silu(h));
}

EncoderBlock::EncoderBlock(ParamFactory f, std::size_t dim, std::size_t heads, std::size_t ffn_ratio)
    : attn(f.sub("attn"), dim, heads),
      norm1(f.sub("norm1"), dim),
      norm2(f.sub("norm2"), dim),
      ffn(f.sub("ffn"), dim, ffn_ratio, Activation::Gelu) {}

Tensor EncoderBlock::operator()(const Tensor& x) const {
  Tensor h = norm1(add(x, attn(x, x, x)));
  return norm2(add(h, ffn(h)));
}

}  // namespace num
DASM_END_NAMESPACE
