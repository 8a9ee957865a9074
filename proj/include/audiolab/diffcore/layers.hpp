// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "audiolab/diffcore/ops.hpp"

// Composite layers built from the differentiable primitives. Parameters are
// plain tensor bundles so models can register them under their own names.
namespace audiolab::diff {

struct LinearParams {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

Tensor linear(const Tensor& x, const LinearParams& p);

// Gated recurrent unit, gate layout [r | z | n] along the 3H axis:
//   r = sigmoid(x Wx_r + bx_r + h Wh_r + bh_r)
//   z = sigmoid(x Wx_z + bx_z + h Wh_z + bh_z)
//   n = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))
//   h' = (1 - z) * n + z * h
struct GruParams {
  Tensor wx;  // [in, 3H]
  Tensor wh;  // [H, 3H]
  Tensor bx;  // [3H]
  Tensor bh;  // [3H]
  std::size_t hidden = 0;
};

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);

// Full unidirectional layer over a time-major sequence batch [T*B, in]
// (row t*B + b). Returns hidden states [T*B, H]. h0 = 0.
Tensor gru_layer(const Tensor& x_tmajor, std::size_t T, std::size_t B, const GruParams& p,
                 bool reverse_time);

// Bidirectional composition: forward and reverse passes concatenated per
// timestep, [T*B, 2H].
Tensor bigru_layer(const Tensor& x_tmajor, std::size_t T, std::size_t B, const GruParams& fwd,
                   const GruParams& bwd);

struct MhaParams {
  LinearParams q, k, v, o;
  std::size_t heads = 1;
};

// Scaled dot-product multi-head attention over single sequences [Tq, D] /
// [Tk, D]. `mask`, when defined, is an additive [Tq, Tk] tensor (0 for
// visible positions, a large negative constant for hidden ones).
Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, const MhaParams& p,
                            const Tensor& mask = Tensor());

struct FfnParams {
  LinearParams l1, l2;
};

Tensor feed_forward(const Tensor& x, const FfnParams& p);  // linear -> relu -> linear

struct LayerNormParams {
  Tensor gamma, beta;
};

Tensor layer_norm(const Tensor& x, const LayerNormParams& p, double eps = 1e-5);

// Additive attention mask value. exp(-1e30 - finite) underflows to exactly
// zero, so masked positions contribute nothing to softmax sums.
inline constexpr double kMaskValue = -1e30;

// Sinusoidal position table, row-major [len, d].
std::vector<double> sinusoidal_posenc(std::size_t len, std::size_t d);

// Upper-triangular causal mask [t, t] (position i attends to j <= i).
Tensor causal_mask(std::size_t t);

}  // namespace audiolab::diff
