// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0
//
// Tensor kernels, distribution math, autodiff tape, optimizer, gradcheck.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "loom/gaussian.hpp"
#include "loom/gradcheck.hpp"
#include "loom/graph.hpp"
#include "loom/optim.hpp"
#include "loom/rng.hpp"

using namespace loom;

TEST_CASE("tensor basics") {
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6);
  CHECK(t.all_finite());
  t.at(0, 1) = std::nan("");
  CHECK(!t.all_finite());
  CHECK_THROWS(Tensor::matrix(2, 2, {1, 2, 3}));
}

TEST_CASE("matmul kernels against hand products") {
  // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::matrix(2, 2, {5, 6, 7, 8});
  Tensor c = Tensor::zeros({2, 2});
  matmul_acc(a.ptr(), b.ptr(), c.ptr(), 2, 2, 2);
  CHECK(c.at(0, 0) == 19);
  CHECK(c.at(0, 1) == 22);
  CHECK(c.at(1, 0) == 43);
  CHECK(c.at(1, 1) == 50);

  Tensor cnt = Tensor::zeros({2, 2});
  matmul_nt_acc(a.ptr(), b.ptr(), cnt.ptr(), 2, 2, 2);  // a * b^T
  CHECK(cnt.at(0, 0) == 17);
  CHECK(cnt.at(0, 1) == 23);

  Tensor ctn = Tensor::zeros({2, 2});
  matmul_tn_acc(a.ptr(), b.ptr(), ctn.ptr(), 2, 2, 2);  // a^T * b
  CHECK(ctn.at(0, 0) == 26);
  CHECK(ctn.at(1, 1) == 44);
}

TEST_CASE("rng determinism and moments") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(7);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = r.gaussian();
    mean += xs[i];
  }
  mean /= n;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  CHECK(std::fabs(mean) < 0.03);
  CHECK(std::fabs(var - 1.0) < 0.05);

  // uniform_int covers its range
  Rng u(3);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) counts[u.uniform_int(5)]++;
  for (int c : counts) CHECK(c > 800);
}

// ---------------------------------------------------------------------------
// distribution math: closed-form oracle values
// ---------------------------------------------------------------------------

TEST_CASE("gaussian_log_density closed forms") {
  DiagonalGaussian g(Tensor::vector({0.0}), Tensor::vector({0.0}));
  CHECK(gaussian_log_density(Tensor::vector({0.0}), g) ==
        doctest::Approx(-0.91893853320467274).epsilon(1e-12));
  CHECK(gaussian_log_density(Tensor::vector({1.0}), g) ==
        doctest::Approx(-1.41893853320467274).epsilon(1e-12));

  // at the mean with unit variance the density is -d/2 log(2 pi)
  for (int d : {1, 3, 7}) {
    DiagonalGaussian gd = DiagonalGaussian::standard(d);
    Tensor x = Tensor::zeros({d});
    CHECK(gaussian_log_density(x, gd) ==
          doctest::Approx(-d * 0.91893853320467274).epsilon(1e-12));
  }

  CHECK_THROWS(gaussian_log_density(Tensor::vector({0.0, 1.0}), g));
  CHECK_THROWS(gaussian_log_density(Tensor::vector({std::nan("")}), g));
}

TEST_CASE("gaussian_kl closed forms and properties") {
  DiagonalGaussian std1 = DiagonalGaussian::standard(1);
  CHECK(gaussian_kl(std1, std1) == 0.0);

  DiagonalGaussian q(Tensor::vector({1.0}), Tensor::vector({0.0}));
  CHECK(gaussian_kl(q, std1) == doctest::Approx(0.5).epsilon(1e-12));

  DiagonalGaussian qv(Tensor::vector({0.0}), Tensor::vector({std::log(4.0)}));
  CHECK(gaussian_kl(qv, std1) == doctest::Approx(0.80685281944005469).epsilon(1e-12));

  DiagonalGaussian p2 = DiagonalGaussian::standard(2);
  CHECK_THROWS(gaussian_kl(q, p2));

  // non-negativity over random pairs; zero iff equal
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    int d = 1 + rng.uniform_int(4);
    DiagonalGaussian a(rng.gaussian_vector(d), rng.gaussian_vector(d));
    DiagonalGaussian b(rng.gaussian_vector(d), rng.gaussian_vector(d));
    CHECK(gaussian_kl(a, b) >= 0.0);
    CHECK(gaussian_kl(a, a) <= 1e-12);
  }
}

TEST_CASE("gaussian density integrates to one on a 1-D grid") {
  DiagonalGaussian g(Tensor::vector({0.3}), Tensor::vector({std::log(2.5)}));
  double sigma = std::sqrt(2.5);
  double lo = 0.3 - 8 * sigma, hi = 0.3 + 8 * sigma;
  const int n = 20000;
  double h = (hi - lo) / n, total = 0.0;
  for (int i = 0; i <= n; ++i) {
    double x = lo + i * h;
    double w = (i == 0 || i == n) ? 0.5 : 1.0;
    total += w * std::exp(gaussian_log_density(Tensor::vector({x}), g));
  }
  CHECK(total * h == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("reparameterized_sample") {
  DiagonalGaussian g(Tensor::vector({2.0}), Tensor::vector({std::log(4.0)}));
  Tensor s = reparameterized_sample(g, Tensor::vector({1.0}));
  CHECK(s.at(0) == doctest::Approx(4.0).epsilon(1e-12));

  CHECK(reparameterized_sample(g, Tensor::vector({0.0})).at(0) == 2.0);

  DiagonalGaussian unit(Tensor::vector({0.0}), Tensor::vector({0.0}));
  CHECK(reparameterized_sample(unit, Tensor::vector({1.0})).at(0) == 1.0);

  CHECK_THROWS(reparameterized_sample(g, Tensor::vector({1.0, 2.0})));
}

// ---------------------------------------------------------------------------
// autodiff tape
// ---------------------------------------------------------------------------

namespace {

// FD check for a scalar loss built from a single parameter tensor
void check_op_gradient(const Tensor& init, const std::function<Var(Graph&, Var)>& body,
                       double tol = 1e-7) {
  ParameterStore store;
  store.add("x", ParamGroup::lm, init);
  auto build = [&](Graph& g) { return body(g, g.param("x")); };
  auto report = finite_diff_gradcheck(build, store, {1e-6, 64, 5});
  INFO(report.summary());
  CHECK(report.max_rel_err < tol);
}

}  // namespace

TEST_CASE("graph op gradients vs central differences") {
  Rng rng(5);
  Tensor m23 = rng.gaussian_tensor({2, 3}, 1.0);
  Tensor m33 = rng.gaussian_tensor({3, 3}, 1.0);

  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(mul(x, x)); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(tanh(x)); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(sigmoid(x)); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(gelu(x)); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(exp_elem(scale(x, 0.3))); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return mean_all(abs_elem(x)); });
  check_op_gradient(m33, [&](Graph& g, Var x) { return sum_all(matmul(x, x)); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(matmul_nt(x, x)); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(softmax_rows(x)); });
  check_op_gradient(m23, [&](Graph& g, Var x) {
    return sum_all(mul(softmax_rows(x), x));
  });
  check_op_gradient(m23, [&](Graph& g, Var x) {
    Var gain = g.constant(Tensor::vector({1.5, 0.5, -1.0}));
    Var bias = g.constant(Tensor::vector({0.1, 0.0, -0.2}));
    return sum_all(mul(layer_norm_rows(x, gain, bias), x));
  });
  check_op_gradient(m23, [&](Graph& g, Var x) {
    std::vector<std::pair<int, int>> pairs{{0, 1}, {1, 2}};
    return softmax_xent(x, pairs);
  });
  check_op_gradient(m23, [&](Graph& g, Var x) {
    return sum_all(mul(concat_cols(x, x), concat_cols(x, x)));
  });
  check_op_gradient(m23, [&](Graph& g, Var x) {
    return sum_all(mul(concat_rows(x, x), concat_rows(x, x)));
  });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(mul(slice_cols(x, 1, 3), slice_cols(x, 0, 2))); });
  check_op_gradient(m23, [&](Graph& g, Var x) { return sum_all(mul(slice_rows(x, 0, 1), slice_rows(x, 1, 2))); });
  check_op_gradient(m23, [&](Graph& g, Var x) {
    std::vector<int> ids{1, 0, 1};
    return sum_all(mul(gather_rows(x, ids), gather_rows(x, ids)));
  });
  check_op_gradient(m23, [&](Graph& g, Var x) {
    Var b = g.constant(Tensor::vector({0.5, -0.5, 1.0}));
    return sum_all(mul(add_bias(x, b), add_bias(x, b)));
  });

  // bias gradient path
  check_op_gradient(Tensor::vector({0.5, -0.5, 1.0}), [&](Graph& g, Var b) {
    Var m = g.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    return sum_all(mul(add_bias(m, b), add_bias(m, b)));
  });
}

TEST_CASE("gaussian graph op gradients") {
  Rng rng(9);
  Tensor v4 = rng.gaussian_tensor({4}, 1.0);
  check_op_gradient(v4, [&](Graph& g, Var x) {
    Var mean = g.constant(Tensor::vector({0.1, -0.2, 0.3, 0.0}));
    Var lv = g.constant(Tensor::vector({0.2, 0.0, -0.1, 0.4}));
    return gaussian_log_density(x, mean, lv);
  });
  check_op_gradient(v4, [&](Graph& g, Var x) {
    Var xc = g.constant(Tensor::vector({0.5, 0.5, -0.5, 0.0}));
    Var lv = g.constant(Tensor::vector({0.2, 0.0, -0.1, 0.4}));
    return gaussian_log_density(xc, x, lv);
  });
  check_op_gradient(v4, [&](Graph& g, Var x) {
    Var xc = g.constant(Tensor::vector({0.5, 0.5, -0.5, 0.0}));
    Var mean = g.constant(Tensor::vector({0.1, -0.2, 0.3, 0.0}));
    return gaussian_log_density(xc, mean, x);
  });
  // KL w.r.t. each argument
  for (int arg = 0; arg < 4; ++arg) {
    check_op_gradient(v4, [&, arg](Graph& g, Var x) {
      Var c0 = g.constant(Tensor::vector({0.1, -0.2, 0.3, 0.0}));
      Var c1 = g.constant(Tensor::vector({0.2, 0.0, -0.1, 0.4}));
      Var c2 = g.constant(Tensor::vector({-0.3, 0.1, 0.0, 0.2}));
      Var args[4] = {c0, c1, c2, x};
      std::swap(args[arg], args[3]);
      return gaussian_kl(args[0], args[1], args[2], args[3]);
    });
  }
  // reparameterized sample: gradient flows through mean and log-variance
  Rng nrng(3);
  Tensor noise = nrng.gaussian_vector(4);
  check_op_gradient(v4, [&](Graph& g, Var x) {
    Var lv = g.constant(Tensor::vector({0.2, 0.0, -0.1, 0.4}));
    Var z = reparam_sample(x, lv, noise);
    return sum_all(mul(z, z));
  });
  check_op_gradient(v4, [&](Graph& g, Var x) {
    Var mean = g.constant(Tensor::vector({0.1, -0.2, 0.3, 0.0}));
    Var z = reparam_sample(mean, x, noise);
    return sum_all(mul(z, z));
  });
}

TEST_CASE("graph matches the closed-form gaussian values") {
  ParameterStore store;
  Graph g(&store);
  Var x = g.constant(Tensor::vector({1.0}));
  Var mean = g.constant(Tensor::vector({0.0}));
  Var lv = g.constant(Tensor::vector({0.0}));
  CHECK(g.value(gaussian_log_density(x, mean, lv)).at(0) ==
        doctest::Approx(-1.41893853320467274).epsilon(1e-12));
  Var kl = gaussian_kl(x, lv, mean, lv);  // q=(1,1), p=(0,1)
  CHECK(g.value(kl).at(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("detach stops gradient flow") {
  ParameterStore store;
  store.add("x", ParamGroup::lm, Tensor::vector({2.0}));
  Graph g(&store);
  Var x = g.param("x");
  Var loss = sum_all(mul(detach(x), x));  // d/dx = detach(x) only
  g.backward(loss);
  CHECK(store.entry("x").grad.at(0) == doctest::Approx(2.0));
}

TEST_CASE("backward accumulates shared parameter uses") {
  ParameterStore store;
  store.add("x", ParamGroup::lm, Tensor::vector({3.0}));
  Graph g(&store);
  Var x = g.param("x");
  Var y = g.param("x");  // same leaf node
  CHECK(x.i == y.i);
  Var loss = sum_all(mul(x, y));  // x^2, d/dx = 2x = 6
  g.backward(loss);
  CHECK(store.entry("x").grad.at(0) == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar and non-finite losses") {
  ParameterStore store;
  Graph g(&store);
  Var v = g.constant(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS(g.backward(v));
  Graph g2(&store);
  Var inf = g2.constant(Tensor::vector({std::numeric_limits<double>::infinity()}));
  CHECK_THROWS(g2.backward(inf));
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

TEST_CASE("nesterov step matches the hand-stepped oracle") {
  ParameterStore store;
  store.add("theta", ParamGroup::lm, Tensor::vector({1.0}));
  OptimizerState opt = OptimizerState::create(store, 0.01, 0.9);

  // v' = 0.9*0 - 0.01*1 = -0.01 ; theta' = 1 + 0.9*(-0.01) - 0.01 = 0.981
  store.entry("theta").grad.at(0) = 1.0;
  sgd_nesterov_step(store, opt);
  CHECK(store.entry("theta").value.at(0) == doctest::Approx(0.981).epsilon(1e-15));
  CHECK(store.entry("theta").grad.at(0) == 0.0);
  CHECK(opt.velocity[0].at(0) == doctest::Approx(-0.01).epsilon(1e-15));

  // second step with grad 1 again:
  // v'' = 0.9*(-0.01) - 0.01 = -0.019 ; theta'' = 0.981 + 0.9*(-0.019) - 0.01
  store.entry("theta").grad.at(0) = 1.0;
  sgd_nesterov_step(store, opt);
  CHECK(store.entry("theta").value.at(0) == doctest::Approx(0.981 + 0.9 * -0.019 - 0.01));
}

TEST_CASE("zero gradients leave parameters unchanged") {
  ParameterStore store;
  store.add("a", ParamGroup::lm, Tensor::vector({1.5, -2.0}));
  OptimizerState opt = OptimizerState::create(store);
  sgd_nesterov_step(store, opt);
  CHECK(store.entry("a").value.at(0) == 1.5);
  CHECK(store.entry("a").value.at(1) == -2.0);
}

TEST_CASE("group-scoped step leaves other groups untouched") {
  ParameterStore store;
  store.add("a", ParamGroup::lm, Tensor::vector({1.0}));
  store.add("b", ParamGroup::tdvae, Tensor::vector({1.0}));
  OptimizerState opt = OptimizerState::create(store);
  store.entry("a").grad.at(0) = 1.0;
  store.entry("b").grad.at(0) = 1.0;
  sgd_nesterov_step(store, opt, {ParamGroup::lm});
  CHECK(store.entry("a").value.at(0) != 1.0);
  CHECK(store.entry("b").value.at(0) == 1.0);
  // b's gradient is untouched too; the caller decides when to clear it
  CHECK(store.entry("b").grad.at(0) == 1.0);
}

TEST_CASE("two identical seeded runs give bit-identical parameters") {
  auto run = [] {
    ParameterStore store;
    Rng rng(77);
    store.add("w", ParamGroup::lm, rng.gaussian_tensor({4, 4}, 0.5));
    OptimizerState opt = OptimizerState::create(store, 0.05, 0.9);
    for (int step = 0; step < 25; ++step) {
      Graph g(&store);
      Var w = g.param("w");
      Var loss = mean_all(mul(w, w));
      g.backward(loss);
      sgd_nesterov_step(store, opt);
    }
    return store.entry("w").value;
  };
  Tensor a = run(), b = run();
  for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

// ---------------------------------------------------------------------------
// gradcheck harness
// ---------------------------------------------------------------------------

TEST_CASE("gradcheck: quadratic loss at theta=3 has derivative 6") {
  ParameterStore store;
  store.add("theta", ParamGroup::lm, Tensor::vector({3.0}));
  auto build = [](Graph& g) {
    Var t = g.param("theta");
    return sum_all(mul(t, t));
  };
  auto report = finite_diff_gradcheck(build, store);
  CHECK(report.max_rel_err < 1e-8);
  CHECK(report.worst.analytic == doctest::Approx(6.0).epsilon(1e-12));

  // constant loss: all gradients zero
  ParameterStore store2;
  store2.add("theta", ParamGroup::lm, Tensor::vector({3.0}));
  auto build_const = [](Graph& g) {
    g.param("theta");  // registered but unused by the loss
    Var c = g.constant(Tensor::vector({4.0}));
    return sum_all(mul(c, c));
  };
  auto report2 = finite_diff_gradcheck(build_const, store2);
  CHECK(report2.max_rel_err < 1e-8);
  CHECK(report2.worst.analytic == 0.0);
}
