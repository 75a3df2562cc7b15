// SPDX-License-Identifier: Apache-2.0
#include "herl/diffeng.hpp"
#include "herl/hypmath.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace herl;
using namespace herl::ad;

namespace {
Matrix row(std::initializer_list<double> xs) {
  Matrix m(1, static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return m;
}
}  // namespace

TEST_CASE("relu backward") {
  Tape t;
  Var x = t.leaf(row({-1.0, 2.0}));
  t.backward(sum(relu(x)));
  CHECK(x.grad() == row({0.0, 1.0}));
}

TEST_CASE("relu at zero uses the zero subgradient") {
  Tape t;
  Var x = t.leaf(row({0.0}));
  t.backward(sum(relu(x)));
  CHECK(x.grad()(0, 0) == 0.0);
}

TEST_CASE("normalized rows have norm-invariant gradient") {
  Tape t;
  Var x = t.leaf(row({0.6, 0.8}));
  Var y = l2_normalize_rows(x);
  CHECK((y.value() - x.value()).norm() < 1e-15);
  t.backward(sum(mul(y, y)));
  CHECK(x.grad().norm() < 1e-15);
}

TEST_CASE("distance derivative from the origin") {
  // d(0, (z, 0)) = 2 artanh(z) at c = 1, derivative 2 / (1 - z^2)
  Tape t;
  Var a = t.constant(row({0.0, 0.0}));
  Var b = t.leaf(row({0.5, 0.0}));
  Var d = hyp_distance_rows(a, b, 1.0);
  CHECK(d.value()(0, 0) == doctest::Approx(std::log(3.0)));
  t.backward(sum(d));
  CHECK(b.grad()(0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
  CHECK(b.grad()(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("simple reductions") {
  Rng rng(1);
  const Matrix p = test::random_matrix(3, 4, rng);
  {
    Tape t;
    Var x = t.leaf(p);
    t.backward(sum(x));
    CHECK(x.grad() == Matrix::Ones(3, 4));
  }
  {
    Tape t;
    Var x = t.leaf(p);
    t.backward(scale(sum(mul(x, x)), 0.5));
    CHECK((x.grad() - p).norm() < 1e-15);
  }
  {
    Tape t;
    Var x = t.leaf(p);
    t.backward(mean(x));
    CHECK((x.grad() - Matrix::Constant(3, 4, 1.0 / 12)).norm() < 1e-15);
  }
}

TEST_CASE("backward is repeatable") {
  Rng rng(2);
  Tape t;
  Var x = t.leaf(test::random_matrix(4, 3, rng));
  Var W = t.leaf(test::random_matrix(3, 2, rng));
  Var b = t.leaf(test::random_matrix(1, 2, rng));
  Var loss = sum(row_logsoftmax(tanh_act(affine(x, W, b))));
  t.backward(loss);
  const Matrix g1 = W.grad();
  t.backward(loss);
  CHECK(W.grad() == g1);
}

TEST_CASE("error paths") {
  Tape t;
  Var a = t.leaf(Matrix::Ones(2, 3));
  Var b = t.leaf(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);
  CHECK_THROWS_AS(t.backward(sum(t.constant(Matrix::Ones(2, 2)))), ConfigError);
  CHECK_THROWS_AS(t.leaf(Matrix::Constant(1, 1, NAN)), NumericError);
  CHECK_THROWS_AS(l2_normalize_rows(t.leaf(Matrix::Zero(1, 2))), DomainError);
  CHECK_THROWS_AS(exp_act(t.leaf(Matrix::Constant(1, 1, 1000.0))), NumericError);
  Tape other;
  Var c = other.leaf(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(add(a, c), ShapeError);
}

TEST_CASE("hyperbolic ops match the point functions") {
  Rng rng(4);
  hyp::HypConfig cfg;
  cfg.c = 0.5;
  cfg.cr = 1.0;
  Tape t;
  const Matrix x = test::random_matrix(6, 3, rng, 2.0);
  const Matrix y = test::random_matrix(6, 3, rng, 2.0);
  Var px = hyp_project_rows(t.leaf(x), cfg);
  Var py = hyp_project_rows(t.leaf(y), cfg);
  Var m = mobius_add_rows(px, py, cfg.c);
  Var d = hyp_distance_rows(px, py, cfg.c);
  Var dp = hyp_distance_pairwise(px, py, cfg.c);
  for (Index i = 0; i < 6; ++i) {
    const hyp::BallPoint a = hyp::hyp_project(x.row(i).transpose(), cfg);
    const hyp::BallPoint b = hyp::hyp_project(y.row(i).transpose(), cfg);
    CHECK((px.value().row(i).transpose() - a.coords()).norm() < 1e-12);
    CHECK((m.value().row(i).transpose() - hyp::mobius_add(a, b).coords()).norm() < 1e-12);
    CHECK(std::abs(d.value()(i, 0) - hyp::hyp_distance(a, b)) < 1e-12);
    CHECK(std::abs(dp.value()(i, i) - hyp::hyp_distance(a, b)) < 1e-12);
  }
}

TEST_CASE("grad_check reference programs") {
  Rng rng(8);
  const Matrix A = [&] {
    Matrix m = test::random_matrix(3, 3, rng);
    return Matrix(m * m.transpose());
  }();
  const double quad = grad_check(
      [&](Tape& t, const Var& x) { return sum(mul(x, matmul(x, t.constant(A)))); }, test::random_matrix(1, 3, rng));
  CHECK(quad < 1e-10);

  const double chain = grad_check([](Tape&, const Var& x) { return sum(tanh_act(tanh_act(tanh_act(x)))); },
                                  test::random_matrix(2, 3, rng));
  CHECK(chain < 1e-6);

  const Matrix a = row({0.3, -0.2, 0.1});
  const Matrix b = row({-0.1, 0.4, 0.25});
  const std::vector<Matrix> pts = {a, b};
  const double dist = grad_check(
      [](Tape&, std::span<const Var> v) { return sum(hyp_distance_rows(v[0], v[1], 1.0)); }, pts);
  CHECK(dist < 1e-5);
  CHECK_THROWS_AS(grad_check([](Tape&, const Var& x) { return sum(x); }, a, 0.0), ConfigError);
}

TEST_CASE("clip jacobian in both regimes") {
  hyp::HypConfig cfg;
  cfg.cr = 1.0;
  // unclipped: identity
  {
    Tape t;
    Var x = t.leaf(row({0.3, 0.4}));
    Var y = clip_rows(x, cfg);
    t.backward(sum(mul(y, t.constant(row({1.0, 2.0})))));
    CHECK((x.grad() - row({1.0, 2.0})).norm() < 1e-15);
  }
  // clipped: checked against finite differences away from the threshold
  const double err = grad_check(
      [&](Tape& t, const Var& x) { return sum(mul(clip_rows(x, cfg), t.constant(row({1.0, -2.0, 0.5})))); },
      row({3.0, 1.0, -2.0}));
  CHECK(err < 1e-8);
}

TEST_CASE("detach blocks gradients") {
  Tape t;
  Var x = t.leaf(row({1.0, 2.0}));
  Var y = add(detach(x), x);
  t.backward(sum(y));
  CHECK(x.grad() == row({1.0, 1.0}));
}
