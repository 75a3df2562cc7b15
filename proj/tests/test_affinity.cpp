// SPDX-License-Identifier: Apache-2.0
#include "herl/affinity.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace herl;
using namespace herl::affinity;

TEST_CASE("heat kernel adjacency") {
  Matrix f(3, 2);
  f << 0.0, 0.0, 0.0, 0.0, 0.3, 0.4;  // |f0 - f2|^2 = 0.25
  const Matrix A = heat_kernel_adjacency(f, 0.25);
  CHECK(A(0, 1) == 1.0);
  CHECK(A(0, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(A.diagonal() == Vector::Ones(3));

  Rng rng(3);
  const Matrix r = test::random_matrix(3, 5, rng);
  const Matrix B = heat_kernel_adjacency(r, 0.7);
  CHECK((B - B.transpose()).cwiseAbs().maxCoeff() <= 1e-15);

  CHECK_THROWS_AS(heat_kernel_adjacency(f, 0.0), ConfigError);
  f(0, 0) = NAN;
  CHECK_THROWS_AS(heat_kernel_adjacency(f, 1.0), NumericError);
}

TEST_CASE("row normalization") {
  CHECK(row_normalize(Matrix::Identity(3, 3)) == Matrix::Identity(3, 3));
  CHECK(row_normalize(Matrix::Ones(2, 2)) == Matrix::Constant(2, 2, 0.5));
  Rng rng(4);
  Matrix A = test::random_matrix(6, 6, rng).cwiseAbs();
  const Matrix T = row_normalize(A);
  CHECK((T.rowwise().sum() - Vector::Ones(6)).cwiseAbs().maxCoeff() < 1e-12);
  A.row(2).setZero();
  CHECK_THROWS_AS(row_normalize(A), NumericError);
}

TEST_CASE("random walk graph") {
  GraphConfig cfg;
  cfg.steps = 2;
  cfg.xi = 0.5;
  cfg.warmup_epochs = 10;
  const Matrix T = Matrix::Constant(2, 2, 0.5);
  Matrix expect(2, 2);
  expect << 0.75, 0.25, 0.25, 0.75;
  CHECK((random_walk_graph(T, cfg, 11).G - expect).norm() < 1e-15);
  CHECK(random_walk_graph(T, cfg, 10).G == Matrix::Identity(2, 2));
  cfg.xi = 1.0;
  CHECK(random_walk_graph(T, cfg, 50).G == Matrix::Identity(2, 2));

  cfg.xi = 0.5;
  Matrix bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(random_walk_graph(bad, cfg, 50), ConfigError);
  CHECK_THROWS_AS(random_walk_graph(Matrix::Ones(2, 3) / 3.0, cfg, 50), ShapeError);
}

TEST_CASE("built graphs are row-stochastic") {
  Rng rng(6);
  GraphConfig cfg;
  cfg.warmup_epochs = 0;
  cfg.sigma = 0.5;
  const AffinityGraph g = build_graph(test::random_matrix(8, 4, rng), cfg, 1);
  CHECK((g.G.rowwise().sum() - Vector::Ones(8)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.G.array() >= 0.0).all());
  CHECK((g.G.diagonal().array() >= cfg.xi).all());
}

TEST_CASE("graph config validation") {
  GraphConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.xi = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.warmup_epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
