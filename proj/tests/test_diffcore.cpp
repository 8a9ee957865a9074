// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "audiolab/diffcore/adam.hpp"
#include "audiolab/diffcore/gradcheck.hpp"
#include "audiolab/diffcore/gradsuite.hpp"
#include "audiolab/diffcore/layers.hpp"
#include "audiolab/diffcore/ops.hpp"

using namespace audiolab;
using namespace audiolab::diff;

TEST_CASE("tensor: shape/data length consistency is enforced") {
  CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1.0, 2.0}), ShapeError);
  Tensor t = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
}

TEST_CASE("embedding lookup returns the requested row") {
  Tensor table = Tensor::from_data({4, 3}, {0, 1, 2, 10, 11, 12, 20, 21, 22, 30, 31, 32});
  Tensor row = embedding_rows(table, {2});
  CHECK(row.data()[0] == 20.0);
  CHECK(row.data()[1] == 21.0);
  CHECK(row.data()[2] == 22.0);
}

TEST_CASE("2x2 max pool of {1,2,3,4} is 4") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(maxpool2x2(x).data()[0] == 4.0);
}

TEST_CASE("max pool ties break to the first element in row-major order") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {5, 5, 1, 0}, true);
  Tensor y = maxpool2x2(x);
  sum_all(y).backward();
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("gru cell with zero weights depends only on biases") {
  // hand evaluation of the gate equations with Wx = Wh = 0
  const std::size_t H = 2;
  GruParams p;
  p.hidden = H;
  p.wx = Tensor::zeros({3, 3 * H});
  p.wh = Tensor::zeros({H, 3 * H});
  p.bx = Tensor::from_data({3 * H}, {0.3, -0.2, 0.5, 0.1, -0.4, 0.7});
  p.bh = Tensor::from_data({3 * H}, {-0.1, 0.6, 0.2, -0.3, 0.8, -0.5});
  Tensor x = Tensor::from_data({1, 3}, {5.0, -2.0, 11.0});  // must not matter
  Tensor h = Tensor::from_data({1, H}, {0.25, -0.75});
  Tensor out = gru_cell(x, h, p);

  auto sg = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t j = 0; j < H; ++j) {
    const double r = sg(p.bx.data()[j] + p.bh.data()[j]);
    const double z = sg(p.bx.data()[H + j] + p.bh.data()[H + j]);
    const double n = std::tanh(p.bx.data()[2 * H + j] + r * p.bh.data()[2 * H + j]);
    const double expect = (1.0 - z) * n + z * h.data()[j];
    CHECK(out.data()[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("gradient_check: sum of squares has exact analytic gradient") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
  auto f = [](const std::vector<Tensor>& v) { return sum_all(mul(v[0], v[0])); };
  auto report = gradient_check(f, {x}, 1e-5, 1e-4);
  CHECK(report.pass);
  CHECK(report.max_rel_error < 1e-8);
  // analytic gradient is 2x
  Tensor x2 = Tensor::from_data({3}, {1, 2, 3}, true);
  Tensor loss = sum_all(mul(x2, x2));
  loss.backward();
  CHECK(x2.grad()[0] == doctest::Approx(2.0));
  CHECK(x2.grad()[1] == doctest::Approx(4.0));
  CHECK(x2.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("gradient_check flags max-pool tie points as excluded") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1.0, 1.0, 0.0, -0.5}, true);
  auto f = [](const std::vector<Tensor>& v) { return sum_all(maxpool2x2(v[0])); };
  auto report = gradient_check(f, {x}, 1e-5, 1e-4);
  CHECK(report.inputs[0].excluded == 2);  // the two tied entries
  CHECK(report.pass);                     // smooth entries still checked
}

TEST_CASE("every differentiable layer passes finite differences on 3 random shapes") {
  auto lines = run_gradient_suite(layer_gradient_checks(17), 1e-5, 1e-4);
  CHECK(lines.size() == 12 * 3);
  for (const auto& l : lines) {
    INFO(l.name, " max_rel_error=", l.max_rel_error);
    CHECK(l.pass);
  }
}

TEST_CASE("adam: lr 0 leaves parameters unchanged but advances moments") {
  ParamStore store;
  Tensor p = store.add("w", Tensor::from_data({2}, {1.0, -2.0}));
  Adam opt(store);

  auto set_grad = [&](double g) {
    auto gr = p.grad_raw();
    gr[0] = g;
    gr[1] = g;
  };
  set_grad(2.0);
  opt.step(0.0);
  CHECK(p.data()[0] == 1.0);
  CHECK(p.data()[1] == -2.0);
  CHECK(opt.step_count() == 1);

  // A zero gradient step now moves the weights only because the first step
  // accumulated moments.
  store.zero_grads();
  set_grad(0.0);
  opt.step(1e-3);
  CHECK(p.data()[0] != 1.0);
}

TEST_CASE("adam: one default step with constant gradient moves by ~lr") {
  ParamStore store;
  Tensor p = store.add("w", Tensor::from_data({1}, {0.5}));
  Adam opt(store);
  p.grad_raw()[0] = 1.0;
  opt.step(1e-3);
  // bias correction makes mhat = vhat = 1 on the first step
  CHECK(p.data()[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-9));
}

TEST_CASE("adam: missing gradient raises a state error naming the parameter") {
  ParamStore store;
  store.add("encoder.w", Tensor::from_data({1}, {0.5}));
  Adam opt(store);
  try {
    opt.step(1e-3);
    FAIL("expected StateError");
  } catch (const StateError& e) {
    CHECK(std::string(e.what()).find("encoder.w") != std::string::npos);
  }
}

TEST_CASE("adam: identical seeds give bitwise-identical trajectories") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    Tensor p = store.add("w", Tensor::zeros({8}));
    init_uniform(p, rng, -1.0, 1.0);
    Adam opt(store);
    std::vector<double> trace;
    for (int i = 0; i < 20; ++i) {
      store.zero_grads();
      Tensor target = Tensor::zeros({8});
      Tensor loss = sum_all(mul(sub(p, target), sub(p, target)));
      loss.backward();
      opt.step(1e-2);
      for (double v : p.data()) trace.push_back(v);
    }
    return trace;
  };
  auto a = run(7), b = run(7);
  CHECK(a == b);  // exact, not approximate
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  Rng rng(3);
  Tensor x = Tensor::zeros({6}, true);
  init_uniform(x, rng, -1.0, 1.0);
  Tensor c = Tensor::zeros({6});
  init_uniform(c, rng, -1.0, 1.0);

  Tensor joint = add(sum_all(mul(x, x)), sum_all(mul(x, c)));
  joint.backward();
  std::vector<double> g_joint(x.grad().begin(), x.grad().end());

  x.zero_grad();
  sum_all(mul(x, x)).backward();
  std::vector<double> g1(x.grad().begin(), x.grad().end());
  x.zero_grad();
  sum_all(mul(x, c)).backward();
  std::vector<double> g2(x.grad().begin(), x.grad().end());

  for (std::size_t i = 0; i < g_joint.size(); ++i)
    CHECK(std::fabs(g_joint[i] - (g1[i] + g2[i])) < 1e-10);
}

TEST_CASE("forward pass is pure: repeated evaluation is bitwise identical") {
  Rng rng(11);
  Tensor x = Tensor::zeros({2, 3, 6, 6});
  init_uniform(x, rng, -1.0, 1.0);
  Tensor w = Tensor::zeros({4, 3, 3, 3});
  init_uniform(w, rng, -0.5, 0.5);
  Tensor b = Tensor::zeros({4});
  Tensor y1 = maxpool2x2(conv2d(x, w, b));
  Tensor y2 = maxpool2x2(conv2d(x, w, b));
  CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

TEST_CASE("shape mismatches raise dimension errors naming the op") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
  Tensor x = Tensor::zeros({1, 2, 4, 4});
  Tensor w = Tensor::zeros({3, 5, 3, 3});
  CHECK_THROWS_AS(conv2d(x, w, Tensor::zeros({3})), ShapeError);
}

TEST_CASE("debug mode detects non-finite values") {
  set_debug_checks(true);
  Tensor x = Tensor::from_data({1}, {-1.0});
  CHECK_THROWS_AS(log_act(x), NumericError);
  set_debug_checks(false);
  CHECK_NOTHROW(log_act(x));
}

TEST_CASE("grad buffers match parameter shapes after backward") {
  Rng rng(5);
  Tensor x = Tensor::zeros({3, 4}, true);
  init_uniform(x, rng, -1, 1);
  Tensor w = Tensor::zeros({4, 2}, true);
  init_uniform(w, rng, -1, 1);
  mean_all(relu(matmul(x, w))).backward();
  CHECK(x.grad().size() == x.numel());
  CHECK(w.grad().size() == w.numel());
}
