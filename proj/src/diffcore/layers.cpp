// SPDX-License-Identifier: Apache-2.0

#include "audiolab/diffcore/layers.hpp"

#include <cmath>

namespace audiolab::diff {

Tensor linear(const Tensor& x, const LinearParams& p) {
  return add_rowvec(matmul(x, p.w), p.b);
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  const std::size_t hid = p.hidden;
  Tensor gx = add_rowvec(matmul(x, p.wx), p.bx);  // [B, 3H]
  Tensor gh = add_rowvec(matmul(h, p.wh), p.bh);
  Tensor r = sigmoid(add(slice_cols(gx, 0, hid), slice_cols(gh, 0, hid)));
  Tensor z = sigmoid(add(slice_cols(gx, hid, hid), slice_cols(gh, hid, hid)));
  Tensor n = tanh_act(add(slice_cols(gx, 2 * hid, hid), mul(r, slice_cols(gh, 2 * hid, hid))));
  return add(mul(one_minus(z), n), mul(z, h));
}

Tensor gru_layer(const Tensor& x_tmajor, std::size_t T, std::size_t B, const GruParams& p,
                 bool reverse_time) {
  if (x_tmajor.dim(0) != T * B)
    throw ShapeError("gru_layer: input rows " + std::to_string(x_tmajor.dim(0)) +
                     " != T*B = " + std::to_string(T * B));
  // x W precomputed for all steps at once; per-step work is the recurrent half
  Tensor gx_all = add_rowvec(matmul(x_tmajor, p.wx), p.bx);  // [T*B, 3H]
  const std::size_t hid = p.hidden;
  Tensor h = Tensor::zeros({B, hid});
  std::vector<Tensor> outs(T);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse_time ? T - 1 - step : step;
    Tensor gx = slice_rows(gx_all, t * B, B);
    Tensor gh = add_rowvec(matmul(h, p.wh), p.bh);
    Tensor r = sigmoid(add(slice_cols(gx, 0, hid), slice_cols(gh, 0, hid)));
    Tensor z = sigmoid(add(slice_cols(gx, hid, hid), slice_cols(gh, hid, hid)));
    Tensor n = tanh_act(add(slice_cols(gx, 2 * hid, hid), mul(r, slice_cols(gh, 2 * hid, hid))));
    h = add(mul(one_minus(z), n), mul(z, h));
    outs[t] = h;
  }
  return concat_rows(outs);
}

Tensor bigru_layer(const Tensor& x_tmajor, std::size_t T, std::size_t B, const GruParams& fwd,
                   const GruParams& bwd) {
  Tensor f = gru_layer(x_tmajor, T, B, fwd, false);
  Tensor b = gru_layer(x_tmajor, T, B, bwd, true);
  return concat_cols({f, b});
}

Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, const MhaParams& p,
                            const Tensor& mask) {
  const std::size_t d = p.q.w.dim(1);
  if (d % p.heads != 0)
    throw ShapeError("multi_head_attention: model width " + std::to_string(d) +
                     " not divisible by " + std::to_string(p.heads) + " heads");
  const std::size_t dh = d / p.heads;
  Tensor q = linear(q_in, p.q);
  Tensor k = linear(kv_in, p.k);
  Tensor v = linear(kv_in, p.v);
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t hidx = 0; hidx < p.heads; ++hidx) {
    Tensor qh = slice_cols(q, hidx * dh, dh);
    Tensor kh = slice_cols(k, hidx * dh, dh);
    Tensor vh = slice_cols(v, hidx * dh, dh);
    Tensor scores = scale(matmul(qh, transpose2d(kh)), inv_sqrt);
    if (mask.defined()) scores = add(scores, mask);
    heads.push_back(matmul(softmax_rows(scores), vh));
  }
  return linear(concat_cols(heads), p.o);
}

Tensor feed_forward(const Tensor& x, const FfnParams& p) {
  return linear(relu(linear(x, p.l1)), p.l2);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p, double eps) {
  return layer_norm_rows(x, p.gamma, p.beta, eps);
}

std::vector<double> sinusoidal_posenc(std::size_t len, std::size_t d) {
  std::vector<double> pe(len * d, 0.0);
  for (std::size_t pos = 0; pos < len; ++pos)
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe[pos * d + i] = std::sin(angle);
      if (i + 1 < d) pe[pos * d + i + 1] = std::cos(angle);
    }
  return pe;
}

Tensor causal_mask(std::size_t t) {
  Tensor m = Tensor::zeros({t, t});
  auto v = m.raw();
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = i + 1; j < t; ++j) v[i * t + j] = kMaskValue;
  return m;
}

}  // namespace audiolab::diff
