#include "doctest.h"

#include <cmath>
#include <random>

#include "ade/errors.hpp"
#include "ade/graph.hpp"
#include "ade/params.hpp"
#include "ade/rng.hpp"

using namespace ade;

namespace {

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform_in(rng, lo, hi);
  return t;
}

// Values bounded away from zero, so relu/cosine/max kinks sit far from the
// probe step.
Tensor rand_nondegenerate(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mag = uniform_in(rng, 0.1, 1.0);
    t[i] = uniform_unit(rng) < 0.5 ? -mag : mag;
  }
  return t;
}

// Reduces op output to a scalar through fixed random coefficients so every
// output coordinate gets a distinct adjoint.
Objective scalarized(Tensor coeffs, std::function<Var(Graph&, ParamBinder&)> op) {
  return Objective{[coeffs = std::move(coeffs), op = std::move(op)](Graph& g, ParamBinder& p) {
    Var y = op(g, p);
    return g.sum_all(g.mul(y, g.constant(coeffs)));
  }};
}

double fd_max_err(const Objective& obj, ParameterStore& store) {
  FdOptions opt;
  opt.eps = 1e-5;
  return finite_difference_check(obj, store, opt).max_rel_error;
}

}  // namespace

TEST_CASE("elementwise and broadcast primitives match finite differences") {
  std::mt19937_64 rng(7);
  ParameterStore store;
  store.create("a", rand_nondegenerate({3, 4}, rng));
  store.create("b", rand_nondegenerate({3, 4}, rng));
  store.create("v", rand_nondegenerate({4}, rng));
  store.create("s", rand_nondegenerate({1}, rng));
  const Tensor c34 = rand_tensor({3, 4}, rng);

  auto check = [&](const char* name, std::function<Var(Graph&, ParamBinder&)> op) {
    const Objective obj = scalarized(c34, std::move(op));
    const double err = fd_max_err(obj, store);
    INFO(name);
    CHECK(err < 1e-6);
  };

  check("add", [](Graph& g, ParamBinder& p) { return g.add(p("a"), p("b")); });
  check("sub", [](Graph& g, ParamBinder& p) { return g.sub(p("a"), p("b")); });
  check("mul", [](Graph& g, ParamBinder& p) { return g.mul(p("a"), p("b")); });
  check("scale", [](Graph& g, ParamBinder& p) { return g.scale(p("a"), -1.7); });
  check("add_rowvec", [](Graph& g, ParamBinder& p) { return g.add_rowvec(p("a"), p("v")); });
  check("add_scalar", [](Graph& g, ParamBinder& p) { return g.add_scalar(p("a"), p("s")); });
  check("relu", [](Graph& g, ParamBinder& p) { return g.relu(p("a")); });
  check("exp", [](Graph& g, ParamBinder& p) { return g.exp_e(p("a")); });
}

TEST_CASE("log matches finite differences on positive inputs") {
  std::mt19937_64 rng(8);
  ParameterStore store;
  store.create("a", rand_tensor({3, 4}, rng, 0.5, 2.0));
  const Tensor c = rand_tensor({3, 4}, rng);
  const Objective obj = scalarized(c, [](Graph& g, ParamBinder& p) { return g.log_e(p("a")); });
  CHECK(fd_max_err(obj, store) < 1e-6);
}

TEST_CASE("linear algebra primitives match finite differences") {
  std::mt19937_64 rng(9);
  ParameterStore store;
  store.create("a", rand_nondegenerate({3, 5}, rng));
  store.create("b", rand_nondegenerate({5, 4}, rng));
  store.create("sq", rand_nondegenerate({4, 4}, rng));
  store.create("u", rand_nondegenerate({6}, rng));
  store.create("w", rand_nondegenerate({6}, rng));

  {
    const Objective obj = scalarized(rand_tensor({3, 4}, rng),
        [](Graph& g, ParamBinder& p) { return g.matmul(p("a"), p("b")); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({5, 3}, rng),
        [](Graph& g, ParamBinder& p) { return g.transpose(p("a")); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({15}, rng),
        [](Graph& g, ParamBinder& p) { return g.reshape(p("a"), {15}); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj{[](Graph& g, ParamBinder& p) { return g.dot(p("u"), p("w")); }};
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj{[](Graph& g, ParamBinder& p) { return g.sum_all(p("a")); }};
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({4}, rng),
        [](Graph& g, ParamBinder& p) { return g.diagonal(p("sq")); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
}

TEST_CASE("gather and stack primitives match finite differences") {
  std::mt19937_64 rng(10);
  ParameterStore store;
  store.create("table", rand_nondegenerate({6, 3}, rng));
  store.create("r1", rand_nondegenerate({3}, rng));
  store.create("r2", rand_nondegenerate({3}, rng));
  store.create("c1", rand_nondegenerate({1}, rng));
  store.create("c2", rand_nondegenerate({1}, rng));

  {
    // Repeated id exercises scatter-add accumulation.
    const Objective obj = scalarized(rand_tensor({4, 3}, rng),
        [](Graph& g, ParamBinder& p) { return g.gather_rows(p("table"), {0, 2, 2, 5}); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({2, 3}, rng),
        [](Graph& g, ParamBinder& p) {
          return g.stack_rows({p("r1"), p("r2")});
        });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({2, 2}, rng),
        [](Graph& g, ParamBinder& p) {
          return g.stack_scalars({p("c1"), p("c2"), p("c2"), p("c1")}, 2, 2);
        });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
}

TEST_CASE("masked reductions match finite differences") {
  std::mt19937_64 rng(11);
  const Mask cmask = {1, 0, 1, 1, 0};
  const Mask rmask = {1, 1, 0};
  ParameterStore store;
  store.create("m", rand_nondegenerate({3, 5}, rng));
  store.create("vec", rand_nondegenerate({5}, rng));
  store.create("w", rand_nondegenerate({3}, rng));

  {
    const Objective obj = scalarized(rand_tensor({3, 5}, rng),
        [&](Graph& g, ParamBinder& p) { return g.masked_softmax_rows(p("m"), cmask); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({3, 5}, rng),
        [&](Graph& g, ParamBinder& p) { return g.masked_log_softmax_rows(p("m"), cmask); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({3}, rng),
        [&](Graph& g, ParamBinder& p) { return g.masked_max_rows(p("m"), cmask); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({5}, rng),
        [&](Graph& g, ParamBinder& p) { return g.masked_softmax_vec(p("vec"), cmask); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({5}, rng),
        [&](Graph& g, ParamBinder& p) { return g.masked_mean_rows(p("m"), rmask); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj = scalarized(rand_tensor({5}, rng),
        [&](Graph& g, ParamBinder& p) { return g.weighted_row_sum(p("w"), p("m")); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
}

TEST_CASE("cosine primitives match finite differences away from the norm floor") {
  std::mt19937_64 rng(12);
  ParameterStore store;
  store.create("a", rand_nondegenerate({3, 4}, rng));
  store.create("b", rand_nondegenerate({5, 4}, rng));
  store.create("u", rand_nondegenerate({4}, rng));
  store.create("w", rand_nondegenerate({4}, rng));

  {
    const Objective obj = scalarized(rand_tensor({3, 5}, rng),
        [](Graph& g, ParamBinder& p) { return g.cosine_matrix(p("a"), p("b")); });
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
  {
    const Objective obj{[](Graph& g, ParamBinder& p) { return g.cosine_vec(p("u"), p("w")); }};
    CHECK(fd_max_err(obj, store) < 1e-6);
  }
}

TEST_CASE("cosine gradient below the norm floor treats the norm as constant") {
  // u is tiny: the floored norm is constant, so d cos / du = v / (floor * |v|).
  ParameterStore store;
  store.create("u", Tensor::from({2}, {1e-12, -2e-12}));
  const Tensor v = Tensor::from({2}, {0.6, -0.8});  // unit norm
  const Objective obj{[&](Graph& g, ParamBinder& p) {
    return g.cosine_vec(p("u"), g.constant(v));
  }};
  evaluate_with_gradients(obj, store);
  const Tensor& gu = store.at("u").grad;
  CHECK(gu[0] == doctest::Approx(0.6 / 1e-8).epsilon(1e-12));
  CHECK(gu[1] == doctest::Approx(-0.8 / 1e-8).epsilon(1e-12));
}

TEST_CASE("layer norm matches finite differences") {
  std::mt19937_64 rng(13);
  ParameterStore store;
  store.create("x", rand_nondegenerate({4, 6}, rng));
  store.create("g", rand_tensor({6}, rng, 0.5, 1.5));
  store.create("b", rand_tensor({6}, rng, -0.3, 0.3));
  const Objective obj = scalarized(rand_tensor({4, 6}, rng),
      [](Graph& g, ParamBinder& p) {
        return g.layer_norm_rows(p("x"), p("g"), p("b"));
      });
  CHECK(fd_max_err(obj, store) < 1e-6);
}

TEST_CASE("mi_bound exact mode matches finite differences") {
  std::mt19937_64 rng(14);
  ParameterStore store;
  store.create("logits", rand_tensor({5, 5}, rng, -1.0, 1.0));
  const Objective obj{[](Graph& g, ParamBinder& p) {
    return g.mi_bound(p("logits"), MiGrad::Exact);
  }};
  CHECK(fd_max_err(obj, store) < 1e-6);
}

TEST_CASE("mi_bound EMA mode keeps the forward value but reshapes the adjoint") {
  std::mt19937_64 rng(15);
  const Tensor logits = rand_tensor({4, 4}, rng, -1.0, 1.0);
  double value_exact, value_ema;
  Tensor grad_exact, grad_ema;
  {
    Graph g;
    Var l = g.input(logits, true);
    Var b = g.mi_bound(l, MiGrad::Exact);
    value_exact = g.scalar_value(b);
    g.backward(b);
    grad_exact = g.gradient(l);
  }
  {
    Graph g;
    Var l = g.input(logits, true);
    Var b = g.mi_bound(l, MiGrad::EmaBlended, /*ema_log=*/2.5);
    value_ema = g.scalar_value(b);
    g.backward(b);
    grad_ema = g.gradient(l);
  }
  CHECK(value_exact == value_ema);
  CHECK_FALSE(grad_exact.equals(grad_ema));
  // Diagonal adjoints are unaffected by the denominator treatment.
  for (std::size_t n = 0; n < 4; ++n) {
    CHECK(grad_exact(n, n) == grad_ema(n, n));
  }
}

TEST_CASE("masked softmax outputs are distributions with exact zeros at masked slots") {
  std::mt19937_64 rng(16);
  const Mask mask = {1, 0, 1, 1, 0, 1};
  Graph g;
  Var m = g.constant(rand_tensor({7, 6}, rng, -3.0, 3.0));
  Var y = g.masked_softmax_rows(m, mask);
  const Tensor& t = g.value(y);
  for (std::size_t i = 0; i < 7; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      if (mask[j]) {
        CHECK(t(i, j) > 0.0);
        sum += t(i, j);
      } else {
        CHECK(t(i, j) == 0.0);
      }
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("masked max routes the subgradient to the first maximum on ties") {
  Graph g;
  Var m = g.input(Tensor::from({1, 3}, {5.0, 5.0, 1.0}), true);
  Var mx = g.masked_max_rows(m, Mask{1, 1, 1});
  g.backward(mx);
  const Tensor& gm = g.gradient(m);
  CHECK(gm(0, 0) == 1.0);
  CHECK(gm(0, 1) == 0.0);
  CHECK(gm(0, 2) == 0.0);
}

TEST_CASE("checked mode rejects non-finite op outputs naming the op") {
  Graph g;
  Var a = g.constant(Tensor::from({2}, {-1.0, 2.0}));
  CHECK_THROWS_WITH_AS(g.log_e(a), doctest::Contains("log"), GraphError);
}

TEST_CASE("unchecked mode lets non-finite values through") {
  Graph g(/*checked=*/false);
  Var a = g.constant(Tensor::from({2}, {-1.0, 2.0}));
  Var l = g.log_e(a);
  CHECK(std::isnan(g.value(l)[0]));
}

TEST_CASE("graph misuse errors") {
  Graph g;
  Var a = g.input(Tensor::from({2, 2}, {1, 2, 3, 4}), true);
  Var b = g.constant(Tensor::from({3}, {1, 2, 3}));
  CHECK_THROWS_AS(g.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(g.gather_rows(a, {2}), std::out_of_range);
  CHECK_THROWS_AS(g.backward(a), std::logic_error);  // non-scalar root
  CHECK_THROWS_AS(g.gradient(a), std::logic_error);  // before backward
  Var s = g.sum_all(a);
  g.backward(s);
  CHECK_THROWS_AS(g.backward(s), std::logic_error);  // re-entry
}

TEST_CASE("evaluation is deterministic bit for bit") {
  std::mt19937_64 rng(17);
  const Tensor x = rand_tensor({4, 4}, rng);
  auto run = [&](Tensor& grad_out) {
    Graph g;
    Var a = g.input(x, true);
    Var y = g.masked_softmax_rows(g.matmul(a, g.transpose(a)), Mask{1, 1, 1, 1});
    Var s = g.sum_all(g.mul(y, y));
    g.backward(s);
    grad_out = g.gradient(a);
    return g.value(s)[0];
  };
  Tensor g1, g2;
  const double v1 = run(g1);
  const double v2 = run(g2);
  CHECK(v1 == v2);
  CHECK(g1.equals(g2));
}

TEST_CASE("shared subgraphs accumulate adjoints from every consumer") {
  // f = sum(x) + 2 sum(x) = 3 sum(x); df/dx = 3 everywhere.
  Graph g;
  Var x = g.input(Tensor::from({3}, {1.0, -2.0, 0.5}), true);
  Var s1 = g.sum_all(x);
  Var s2 = g.scale(g.sum_all(x), 2.0);
  Var f = g.add(s1, s2);
  g.backward(f);
  const Tensor& gx = g.gradient(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(gx[i] == 3.0);
}
