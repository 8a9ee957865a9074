// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "audiolab/diffcore/tensor.hpp"

// Differentiable primitives. Every op records its backward closure when any
// input requires grad. Shapes use the conventions:
//   matrices       [R,C] row-major
//   feature maps   [N,C,H,W]
//   sequences      time-major flattened [T*B, F] (row t*B+b)
namespace audiolab::diff {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor one_minus(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor exp_act(const Tensor& x);
Tensor log_act(const Tensor& x);
Tensor sqrt_act(const Tensor& x);
Tensor softplus(const Tensor& x);  // log(1 + e^x), numerically stable
// broadcast multiply by a [1] tensor (e.g. a learnable inverse temperature)
Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s);

// ---- shape ----
Tensor reshape(const Tensor& x, Shape s);
Tensor transpose2d(const Tensor& x);
Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t nrows);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t ncols);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor repeat_row(const Tensor& v, std::size_t rows);  // [C] -> [rows,C]
// out row i = x row index[i]; indices must be a permutation-free gather
Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& index);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& x, const Tensor& v);  // [R,C] + [C]
Tensor div_rows(const Tensor& x, const Tensor& r);    // [R,C] / [R]

// ---- reductions ----
Tensor row_sum(const Tensor& x);   // [R,C] -> [R]
Tensor col_sum(const Tensor& x);   // [R,C] -> [C]
Tensor col_mean(const Tensor& x);  // [R,C] -> [C]
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]

// ---- softmax family ----
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

// ---- gather ----
Tensor gather_diag(const Tensor& x);  // [N,N] -> [N]
Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& ids);  // [R,C] -> [R]
Tensor embedding_rows(const Tensor& table, const std::vector<std::size_t>& ids);

// ---- neural-net layers ----
// 3x3 (or any odd kernel) convolution, stride 1, zero padding k/2.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
// 2x2 max pooling, stride 2, floor on odd extents; ties resolved to the
// first element in row-major window order (gradient routed there only).
Tensor maxpool2x2(const Tensor& x);
Tensor mean_hw(const Tensor& x);  // [N,C,H,W] -> [N,C]
Tensor max_hw(const Tensor& x);   // [N,C,H,W] -> [N,C], first-index ties
// Batch statistics in training mode (updates running buffers in place with
// momentum), stored running statistics in inference mode. Variance is biased.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor running_mean, Tensor running_var, bool training,
                    double momentum, double eps);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

}  // namespace audiolab::diff
