// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradient_suite.hpp"

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "dasm/numerics/grad_check.hpp"
#include "dasm/training/loss.hpp"

static_assert(sizeof(dasm::Real) == 8, "gradient suite must be built against the 64-bit model core");

namespace dasm::testing {

namespace {

using namespace dasm::num;
using Op = std::function<Tensor(const std::vector<Tensor>&)>;

constexpr double kOpTolerance = 1e-4;
constexpr double kModelTolerance = 1e-3;

double check_op(const Op& op, const std::vector<Shape>& shapes, std::uint64_t seed, Real spread, int skip) {
  std::mt19937_64 rng(seed);
  ParameterList params;
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor t = Tensor::randn(shapes[i], rng, spread);
    t.set_requires_grad(true);
    inputs.push_back(t);
    if (static_cast<int>(i) != skip) params.push_back({"in" + std::to_string(i), t, ""});
  }
  Tensor probe = op(inputs);
  Tensor weights = Tensor::randn(probe.shape(), rng);
  GradCheckOptions options;
  options.step = 1e-4;
  return grad_check([&] { return weighted_sum(op(inputs), weights); }, params, options).max_relative_error;
}

void add_op(std::vector<GradientCase>& out, const std::string& name, const Op& op, const std::vector<Shape>& shapes,
            Real spread = 1, int skip = -1) {
  double worst = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) worst = std::max(worst, check_op(op, shapes, seed, spread, skip));
  out.push_back({name, worst, kOpTolerance});
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.set_width(32, 4);
  cfg.encoder.mel_bins = 32;
  cfg.encoder.cnn_blocks = 2;
  cfg.encoder.cnn_channels = 4;
  cfg.seed = 5;
  return cfg;
}

// Moves every parameter off its initial value. At initialization all layer
// norm gains equal 1, which makes sums over a normalized row constant and
// leaves whole subnetworks with an exactly zero gradient.
void jitter(const ParameterList& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  for (const auto& p : params) {
    Tensor t = p.value;
    for (auto& v : t.mutable_data()) v += noise(rng);
  }
}

// Key biases add the same logit to every key of a query row; softmax removes
// them, so their gradient is identically zero and a relative error is
// meaningless there.
ParameterList probed(const ParameterList& params) {
  ParameterList out;
  for (const auto& p : params) {
    if (!p.name.ends_with(".bk")) out.push_back(p);
  }
  return out;
}

double check_params(const std::function<Tensor()>& f, const ParameterList& all, std::size_t coords) {
  jitter(all, 29);
  const ParameterList params = probed(all);
  GradCheckOptions options;
  options.step = 1e-3;
  options.max_coords_per_tensor = coords;
  options.seed = 17;
  auto r = grad_check(f, params, options);
  if (std::getenv("DASM_GRAD_DEBUG")) {
    std::fprintf(stderr, "%s[%zu] analytic %.12g numeric %.12g\n", r.worst_parameter.c_str(), r.worst_index,
                 r.analytic, r.numeric);
  }
  return r.max_relative_error;
}

}  // namespace

std::vector<GradientCase> operation_gradient_cases() {
  std::vector<GradientCase> out;
  add_op(out, "matmul", [](auto& in) { return matmul(in[0], in[1]); }, {{3, 4}, {4, 2}});
  add_op(out, "matmul_nt", [](auto& in) { return matmul_nt(in[0], in[1]); }, {{3, 4}, {5, 4}});
  add_op(out, "linear", [](auto& in) { return linear(in[0], in[1], in[2]); }, {{3, 4}, {4, 5}, {5}});
  add_op(out, "transpose", [](auto& in) { return transpose(in[0]); }, {{3, 4}});
  add_op(out, "add", [](auto& in) { return add(in[0], in[1]); }, {{2, 3}, {2, 3}});
  add_op(out, "sub", [](auto& in) { return sub(in[0], in[1]); }, {{2, 3}, {2, 3}});
  add_op(out, "mul", [](auto& in) { return mul(in[0], in[1]); }, {{2, 3}, {2, 3}});
  add_op(out, "scale", [](auto& in) { return scale(in[0], -1.7); }, {{2, 3}});
  add_op(out, "add_row", [](auto& in) { return add_row(in[0], in[1]); }, {{4, 3}, {3}});
  add_op(out, "mul_row", [](auto& in) { return mul_row(in[0], in[1]); }, {{4, 3}, {3}});
  add_op(out, "affine_scalar", [](auto& in) { return affine_scalar(in[0], in[1], in[2]); }, {{3, 4}, {1}, {1}});
  add_op(out, "sigmoid", [](auto& in) { return sigmoid(in[0]); }, {{3, 5}}, 2);
  add_op(out, "gelu", [](auto& in) { return gelu(in[0]); }, {{3, 5}}, 2);
  add_op(out, "silu", [](auto& in) { return silu(in[0]); }, {{3, 5}}, 2);
  add_op(out, "glu", [](auto& in) { return glu(in[0]); }, {{3, 6}}, 2);
  add_op(out, "layer_norm", [](auto& in) { return layer_norm(in[0], in[1], in[2]); }, {{4, 8}, {8}, {8}});
  add_op(out, "l2_normalize_rows", [](auto& in) { return l2_normalize_rows(in[0]); }, {{3, 5}});
  Mask mask(3, 4);
  mask.set(0, 1, false);
  mask.set(2, 0, false);
  mask.set(2, 3, false);
  add_op(out, "masked_softmax", [mask](auto& in) { return masked_softmax(in[0], &mask); }, {{3, 4}}, 2);
  add_op(out, "slice_cols", [](auto& in) { return slice_cols(in[0], 1, 2); }, {{3, 5}});
  add_op(out, "slice_rows", [](auto& in) { return slice_rows(in[0], 1, 2); }, {{4, 3}});
  add_op(out, "concat_cols", [](auto& in) { return concat_cols({in[0], in[1]}); }, {{3, 2}, {3, 4}});
  add_op(out, "concat_rows", [](auto& in) { return concat_rows({in[0], in[1]}); }, {{2, 3}, {4, 3}});
  add_op(out, "reshape", [](auto& in) { return reshape(in[0], {6, 2}); }, {{3, 4}});
  add_op(out, "sum", [](auto& in) { return sum(in[0]); }, {{3, 4}});
  add_op(out, "mean", [](auto& in) { return mean(in[0]); }, {{6, 4}});
  add_op(out, "mean_row_groups", [](auto& in) { return mean_row_groups(in[0], 3); }, {{6, 4}});
  add_op(out, "max_over_rows", [](auto& in) { return max_over_rows(in[0]); }, {{6, 4}});
  add_op(out, "conv2d", [](auto& in) { return conv2d(in[0], in[1], in[2]); }, {{2, 6, 6}, {2, 2, 3, 3}, {2}});
  add_op(out, "conv2d strided padded",
         [](auto& in) { return conv2d(in[0], in[1], in[2], Conv2dOptions{2, 1, 1, 1}); },
         {{2, 6, 6}, {3, 2, 3, 3}, {3}});
  add_op(out, "avg_pool2d", [](auto& in) { return avg_pool2d(in[0], 2, 3); }, {{2, 5, 7}});
  add_op(out, "depthwise_conv1d", [](auto& in) { return depthwise_conv1d(in[0], in[1], in[2]); },
         {{9, 4}, {5, 4}, {4}});
  add_op(out, "linear_upsample", [](auto& in) { return linear_upsample(in[0], 4); }, {{3, 5}});
  // The key bias shifts a whole row of logits and so has zero gradient; it is
  // excluded from the relative-error probe.
  Mask attn_mask(2, 12);
  attn_mask.set(0, 3, false);
  attn_mask.set(1, 7, false);
  add_op(
      out, "multi_head_attention",
      [attn_mask](auto& in) {
        AttentionProjections p{in[3], in[4], in[5], in[6], in[7], in[8], in[9], in[10]};
        return multi_head_attention(in[0], in[1], in[2], &attn_mask, 12, p);
      },
      {{2, 24}, {12, 24}, {12, 24}, {24, 24}, {24}, {24, 24}, {24}, {24, 24}, {24}, {24, 24}, {24}}, 0.5, 6);
  LossConfig focal;
  add_op(
      out, "asymmetric_focal_loss",
      [focal](auto& in) {
        Tensor y = Tensor::from({3, 4}, {1, 0, 0, 1, 0, 1, 0.3, 0, 1, 1, 0, 0.6});
        return asymmetric_focal_loss(sigmoid(in[0]), y, focal);
      },
      {{3, 4}}, 2);
  return out;
}

std::vector<GradientCase> model_gradient_cases() {
  std::vector<GradientCase> out;
  std::mt19937_64 rng(23);
  const ModelConfig cfg = tiny_model();
  Tensor mel = Tensor::randn({32, 32}, rng);
  Tensor queries = l2_normalize_rows(Tensor::randn({3, 32}, rng));
  Tensor frame_targets = Tensor::zeros({16, 3});
  for (std::size_t t = 3; t < 9; ++t) frame_targets.mutable_data()[t * 3 + 0] = 1;
  for (std::size_t t = 10; t < 16; ++t) frame_targets.mutable_data()[t * 3 + 2] = 1;
  Tensor clip_targets = clip_targets_from_frames(frame_targets);
  LossConfig loss;

  {
    ParameterList params;
    AudioEncoder enc(ParamFactory(params, rng, "", "head"), cfg.encoder);
    out.push_back({"encoder (sum of fused features)",
                   check_params([&] { return sum(enc(mel).fused.values); }, params, 6), kModelTolerance});
  }
  {
    ParameterList params;
    ClipHead clip(ParamFactory(params, rng, "clip", "head"), 32);
    MapHead map(ParamFactory(params, rng, "map", "head"), 32);
    Tensor w = Tensor::randn({3, 32}, rng);
    out.push_back({"clip and map heads",
                   check_params([&] { return add(sum(clip(queries)), weighted_sum(map(queries), w)); }, params, 0),
                   kOpTolerance});
  }
  {
    ParameterList params;
    ContextNetwork ctx(ParamFactory(params, rng, "", "head"), cfg.decoder);
    Tensor x = Tensor::randn({16, 32}, rng);
    Tensor w = Tensor::randn({16, 32}, rng);
    out.push_back({"context network", check_params([&] { return weighted_sum(ctx(x), w); }, params, 8),
                   kModelTolerance});
  }
  {
    DasmModel model(cfg);
    Mask m = build_mask(2, 1, MaskStrategy::BaseVisibleToNovel);
    auto f = [&] { return total_loss(model.forward(mel, queries, &m), frame_targets, clip_targets, loss).total; };
    out.push_back({"full model loss (T=16, N=3, D=32)", check_params(f, model.parameters(), 6), kModelTolerance});
  }
  {
    ModelConfig ablated = cfg;
    ablated.ablation.event_decoder = false;
    DasmModel model(ablated);
    auto f = [&] { return total_loss(model.forward(mel, queries), frame_targets, clip_targets, loss).total; };
    out.push_back({"cosine-matching ablation loss", check_params(f, model.parameters(), 6), kModelTolerance});
  }
  return out;
}

}  // namespace dasm::testing
