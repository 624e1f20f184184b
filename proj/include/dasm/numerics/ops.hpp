// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dasm/numerics/tensor.hpp"

DASM_BEGIN_NAMESPACE
namespace num {

// Dense 2-D algebra. Shapes are row-major; "[m×n]" means m rows.

/// a[m×k] · b[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m×k] · b[n×k]ᵀ.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// x[m×k] · w[k×n] + bias[n]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);
/// a[..×n] + row[n] broadcast over leading axes.
Tensor add_row(const Tensor& a, const Tensor& row);
/// a[..×n] ⊙ row[n] broadcast over leading axes.
Tensor mul_row(const Tensor& a, const Tensor& row);

Tensor sigmoid(const Tensor& a);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
/// Gated linear unit over the last axis: first half ⊙ sigmoid(second half).
Tensor glu(const Tensor& a);

/// Normalizes each row along the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps = Real(1e-5));

/// Row-wise softmax over the last axis restricted to allowed columns. Masked
/// positions receive exactly 0. `mask` rows must match the number of rows of
/// `logits` (all leading axes flattened) and its columns the last axis.
Tensor masked_softmax(const Tensor& logits, const Mask* mask = nullptr);

/// Rows scaled to unit Euclidean norm (norm floored at eps).
Tensor l2_normalize_rows(const Tensor& x, Real eps = Real(1e-8));

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum of a ⊙ w with w a constant weight tensor; convenient scalar probe.
Tensor weighted_sum(const Tensor& a, const Tensor& weights);
/// Column-wise maximum of x[m×n] -> [n]; the gradient flows to the first
/// maximizing row.
Tensor max_over_rows(const Tensor& x);
/// s·x + b with s and b single-element tensors.
Tensor affine_scalar(const Tensor& x, const Tensor& s, const Tensor& b);
/// x[(m·g)×n] -> [m×n]; each output row is the mean of g consecutive rows.
Tensor mean_row_groups(const Tensor& x, std::size_t group);

struct Conv2dOptions {
  std::size_t stride_f = 1;
  std::size_t stride_t = 1;
  std::size_t pad_f = 0;
  std::size_t pad_t = 0;
};

/// Cross-correlation of x[C_in×F×T] with kernels[C_out×C_in×kF×kT], plus an
/// optional per-output-channel bias. Output extents follow
/// floor((F + 2·pad − k) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, const Conv2dOptions& opt = {});

/// Non-overlapping average pooling of x[C×F×T] by (pool_f, pool_t); trailing
/// remainders are dropped.
Tensor avg_pool2d(const Tensor& x, std::size_t pool_f, std::size_t pool_t);

/// Per-channel convolution of x[T×D] along time with kernels[K×D] (K odd,
/// zero "same" padding) plus bias[D].
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias);

/// Endpoint-aligned linear interpolation of x[T_c×D] along time to
/// [(T_c·factor)×D]. Output row j samples source position
/// j·(T_c − 1)/(T_c·factor − 1).
Tensor linear_upsample(const Tensor& x, std::size_t factor);

/// Scaled dot-product attention over `heads` column groups, heads
/// concatenated, before any output projection. q[Lq×D], k and v [Lk×D];
/// `mask`, when given, is [Lq×Lk].
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask,
                                    std::size_t heads);

/// Input and output projections of one attention layer. Weights are [D×D]
/// (applied as x·W), biases [D].
struct AttentionProjections {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Full multi-head attention: project, attend per head, concatenate, project.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask,
                            std::size_t heads, const AttentionProjections& proj);

/// Fixed sinusoidal table [length×dim] (sin on even, cos on odd columns).
Tensor sinusoidal_encoding(std::size_t length, std::size_t dim, std::size_t offset = 0);

}  // namespace num
DASM_END_NAMESPACE
