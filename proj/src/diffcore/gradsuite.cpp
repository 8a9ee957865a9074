// SPDX-License-Identifier: Apache-2.0

#include "audiolab/diffcore/gradsuite.hpp"

#include "audiolab/diffcore/layers.hpp"

namespace audiolab::diff {

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, bool rg = true, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (auto& v : t.raw()) v = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

// Scalarize with a fixed random projection so no output element is ignored.
Tensor project(const Tensor& out, std::uint64_t seed) {
  Rng rng(seed);
  Tensor r = Tensor::zeros(out.shape());
  for (auto& v : r.raw()) v = 2.0 * rng.uniform() - 1.0;
  return sum_all(mul(out, r));
}

using Builder = std::function<GradCheckReport(double, double)>;

Builder check_fn(std::function<Tensor(const std::vector<Tensor>&)> f, std::vector<Tensor> inputs,
                 std::vector<std::string> names) {
  return [f = std::move(f), inputs = std::move(inputs),
          names = std::move(names)](double eps, double tol) {
    return gradient_check(f, inputs, eps, tol, names);
  };
}

}  // namespace

std::vector<NamedGradCheck> layer_gradient_checks(std::uint64_t seed) {
  std::vector<NamedGradCheck> checks;
  Rng master(seed);

  struct Dims2 {
    std::size_t a, b, c;
  };
  const Dims2 mm_shapes[3] = {{2, 3, 4}, {4, 4, 2}, {1, 5, 3}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(static_cast<std::uint64_t>(s));
    auto [m, k, n] = mm_shapes[s];
    std::vector<Tensor> in = {rand_tensor({m, k}, rng), rand_tensor({k, n}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"matrix-multiply/" + std::to_string(s),
                      check_fn([ps](const std::vector<Tensor>& v) {
                        return project(matmul(v[0], v[1]), ps);
                      }, in, {"a", "b"})});
  }

  struct ConvDims {
    std::size_t n, c, h, w, co;
  };
  const ConvDims conv_shapes[3] = {{1, 1, 4, 5, 2}, {2, 2, 5, 4, 3}, {1, 3, 6, 6, 2}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(100 + static_cast<std::uint64_t>(s));
    auto d = conv_shapes[s];
    std::vector<Tensor> in = {rand_tensor({d.n, d.c, d.h, d.w}, rng),
                              rand_tensor({d.co, d.c, 3, 3}, rng),
                              rand_tensor({d.co}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"2d-convolution/" + std::to_string(s),
                      check_fn([ps](const std::vector<Tensor>& v) {
                        return project(conv2d(v[0], v[1], v[2]), ps);
                      }, in, {"x", "w", "b"})});
  }

  const ConvDims pool_shapes[3] = {{1, 1, 4, 4, 0}, {2, 2, 6, 4, 0}, {1, 3, 5, 7, 0}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(200 + static_cast<std::uint64_t>(s));
    auto d = pool_shapes[s];
    std::vector<Tensor> in = {rand_tensor({d.n, d.c, d.h, d.w}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"2x2-max-pool/" + std::to_string(s),
                      check_fn([ps](const std::vector<Tensor>& v) {
                        return project(maxpool2x2(v[0]), ps);
                      }, in, {"x"})});
  }

  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(300 + static_cast<std::uint64_t>(s));
    const std::size_t n = 2 + static_cast<std::size_t>(s), c = 2, h = 3, w = 3;
    std::vector<Tensor> in = {rand_tensor({n, c, h, w}, rng), rand_tensor({c}, rng),
                              rand_tensor({c}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back(
        {"batch-norm/" + std::to_string(s), check_fn([ps](const std::vector<Tensor>& v) {
           Tensor rm = Tensor::zeros({v[1].dim(0)});
           Tensor rv = Tensor::full({v[1].dim(0)}, 1.0);
           return project(batch_norm2d(v[0], v[1], v[2], rm, rv, true, 0.9, 1e-5), ps);
         }, in, {"x", "gamma", "beta"})});
  }

  const Dims2 ln_shapes[3] = {{2, 5, 0}, {4, 3, 0}, {1, 8, 0}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(400 + static_cast<std::uint64_t>(s));
    auto [r, c, unused] = ln_shapes[s];
    std::vector<Tensor> in = {rand_tensor({r, c}, rng), rand_tensor({c}, rng),
                              rand_tensor({c}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"layer-norm/" + std::to_string(s),
                      check_fn([ps](const std::vector<Tensor>& v) {
                        return project(layer_norm_rows(v[0], v[1], v[2], 1e-5), ps);
                      }, in, {"x", "gamma", "beta"})});
  }

  struct GruDims {
    std::size_t t, b, in, h;
  };
  const GruDims gru_shapes[3] = {{3, 2, 4, 3}, {2, 1, 3, 2}, {4, 2, 2, 4}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(500 + static_cast<std::uint64_t>(s));
    auto d = gru_shapes[s];
    std::vector<Tensor> in = {
        rand_tensor({d.t * d.b, d.in}, rng), rand_tensor({d.in, 3 * d.h}, rng),
        rand_tensor({d.h, 3 * d.h}, rng),    rand_tensor({3 * d.h}, rng),
        rand_tensor({3 * d.h}, rng),         rand_tensor({d.in, 3 * d.h}, rng),
        rand_tensor({d.h, 3 * d.h}, rng),    rand_tensor({3 * d.h}, rng),
        rand_tensor({3 * d.h}, rng)};
    const std::uint64_t ps = rng.next_u64();
    const std::size_t T = d.t, B = d.b, H = d.h;
    checks.push_back(
        {"gru-bidirectional/" + std::to_string(s), check_fn([ps, T, B, H](const std::vector<Tensor>& v) {
           GruParams fwd{v[1], v[2], v[3], v[4], H};
           GruParams bwd{v[5], v[6], v[7], v[8], H};
           return project(bigru_layer(v[0], T, B, fwd, bwd), ps);
         }, in, {"x", "f.wx", "f.wh", "f.bx", "f.bh", "b.wx", "b.wh", "b.bx", "b.bh"})});
  }

  struct MhaDims {
    std::size_t t, d, heads;
  };
  const MhaDims mha_shapes[3] = {{3, 4, 2}, {4, 6, 3}, {2, 4, 1}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(600 + static_cast<std::uint64_t>(s));
    auto d = mha_shapes[s];
    std::vector<Tensor> in = {rand_tensor({d.t, d.d}, rng)};
    for (int lp = 0; lp < 4; ++lp) {
      in.push_back(rand_tensor({d.d, d.d}, rng, true, 0.5));
      in.push_back(rand_tensor({d.d}, rng, true, 0.1));
    }
    const std::uint64_t ps = rng.next_u64();
    const std::size_t heads = d.heads;
    checks.push_back(
        {"multi-head-attention/" + std::to_string(s),
         check_fn([ps, heads](const std::vector<Tensor>& v) {
           MhaParams p{{v[1], v[2]}, {v[3], v[4]}, {v[5], v[6]}, {v[7], v[8]}, heads};
           return project(multi_head_attention(v[0], v[0], p), ps);
         }, in, {"x", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"})});
  }

  const Dims2 ffn_shapes[3] = {{3, 4, 6}, {2, 5, 3}, {4, 2, 4}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(700 + static_cast<std::uint64_t>(s));
    auto [r, d_in, d_hid] = ffn_shapes[s];
    std::vector<Tensor> in = {rand_tensor({r, d_in}, rng), rand_tensor({d_in, d_hid}, rng),
                              rand_tensor({d_hid}, rng), rand_tensor({d_hid, d_in}, rng),
                              rand_tensor({d_in}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"feed-forward/" + std::to_string(s),
                      check_fn([ps](const std::vector<Tensor>& v) {
                        FfnParams p{{v[1], v[2]}, {v[3], v[4]}};
                        return project(feed_forward(v[0], p), ps);
                      }, in, {"x", "w1", "b1", "w2", "b2"})});
  }

  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(800 + static_cast<std::uint64_t>(s));
    const std::size_t v = 5 + static_cast<std::size_t>(s), dd = 3 + static_cast<std::size_t>(s);
    std::vector<std::size_t> ids;
    for (int i = 0; i < 4; ++i)
      ids.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(v) - 1)));
    std::vector<Tensor> in = {rand_tensor({v, dd}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"embedding-lookup/" + std::to_string(s),
                      check_fn([ps, ids](const std::vector<Tensor>& t) {
                        return project(embedding_rows(t[0], ids), ps);
                      }, in, {"table"})});
  }

  const ConvDims gp_shapes[3] = {{1, 2, 3, 4, 0}, {2, 3, 2, 2, 0}, {1, 1, 5, 3, 0}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(900 + static_cast<std::uint64_t>(s));
    auto d = gp_shapes[s];
    std::vector<Tensor> in = {rand_tensor({d.n, d.c, d.h, d.w}, rng)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"mean-pool/" + std::to_string(s),
                      check_fn([ps](const std::vector<Tensor>& v) {
                        return project(mean_hw(v[0]), ps);
                      }, in, {"x"})});
    Rng rng2 = master.fork(950 + static_cast<std::uint64_t>(s));
    std::vector<Tensor> in2 = {rand_tensor({d.n, d.c, d.h, d.w}, rng2)};
    const std::uint64_t ps2 = rng2.next_u64();
    checks.push_back({"max-pool/" + std::to_string(s),
                      check_fn([ps2](const std::vector<Tensor>& v) {
                        return project(max_hw(v[0]), ps2);
                      }, in2, {"x"})});
  }

  const Dims2 ls_shapes[3] = {{2, 5, 0}, {3, 3, 0}, {1, 7, 0}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(1000 + static_cast<std::uint64_t>(s));
    auto [r, c, unused] = ls_shapes[s];
    std::vector<Tensor> in = {rand_tensor({r, c}, rng, true, 2.0)};
    const std::uint64_t ps = rng.next_u64();
    checks.push_back({"log-softmax/" + std::to_string(s),
                      check_fn([ps](const std::vector<Tensor>& v) {
                        return project(log_softmax_rows(v[0]), ps);
                      }, in, {"x"})});
  }

  return checks;
}

std::vector<GradSuiteLine> run_gradient_suite(const std::vector<NamedGradCheck>& checks,
                                              double eps, double tol) {
  std::vector<GradSuiteLine> lines;
  lines.reserve(checks.size());
  for (const auto& c : checks) {
    GradCheckReport r = c.run(eps, tol);
    std::size_t excluded = 0;
    for (const auto& ir : r.inputs) excluded += ir.excluded;
    lines.push_back({c.name, r.max_rel_error, excluded, r.pass});
  }
  return lines;
}

}  // namespace audiolab::diff
