// SPDX-License-Identifier: Apache-2.0
#include "herl/impute.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace herl;
using namespace herl::impute;

namespace {
model::ModelState toy_state() {
  model::ModelSpec spec;
  spec.input_dims = {4, 3};
  spec.hidden = {5};
  spec.embed_dim = 3;
  spec.prototypes = 2;
  spec.seed = 17;
  return model::init_model(spec);
}

MaskedDataset toy_data(Index n, Rng& rng) {
  MaskedDataset d;
  d.views = {test::random_matrix(n, 4, rng), test::random_matrix(n, 3, rng)};
  d.mask = Matrix::Ones(n, 2);
  return d;
}
}  // namespace

TEST_CASE("full mask keeps teacher features") {
  const auto st = toy_state();
  Rng rng(1);
  const MaskedDataset d = toy_data(6, rng);
  const auto z = recover(st, d);
  CHECK(z[0] == model::teacher_features(st, 0, d.views[0]));
  CHECK(z[1] == model::teacher_features(st, 1, d.views[1]));
  CHECK(d.complete_rows().size() == 6);
}

TEST_CASE("missing column is translated through the projector") {
  const auto st = toy_state();
  Rng rng(2);
  MaskedDataset d = toy_data(5, rng);
  d.mask.col(1).setZero();
  const auto z = recover(st, d);
  CHECK(z[1] == model::apply_projector(st, model::teacher_features(st, 0, d.views[0])));
  CHECK(z[0] == model::teacher_features(st, 0, d.views[0]));
  CHECK(d.complete_rows().empty());
}

TEST_CASE("mixed mask leaves observed rows untouched") {
  const auto st = toy_state();
  Rng rng(3);
  MaskedDataset d = toy_data(8, rng);
  d.mask(1, 0) = 0.0;
  d.mask(4, 1) = 0.0;
  d.mask(6, 1) = 0.0;
  const auto z = recover(st, d);
  const Matrix f0 = model::teacher_features(st, 0, d.views[0]);
  const Matrix f1 = model::teacher_features(st, 1, d.views[1]);
  const Matrix g0 = model::apply_projector(st, f0);
  const Matrix g1 = model::apply_projector(st, f1);
  for (Index i = 0; i < 8; ++i) {
    CHECK(z[0].row(i) == (d.mask(i, 0) == 1.0 ? f0.row(i) : g1.row(i)));
    CHECK(z[1].row(i) == (d.mask(i, 1) == 1.0 ? f1.row(i) : g0.row(i)));
  }
  // garbage in a missing row has no effect
  MaskedDataset noisy = d;
  noisy.views[0].row(1).setConstant(1e3);
  CHECK(recover(st, noisy)[0] == z[0]);
  CHECK(recover(st, d)[1] == z[1]);
  CHECK(d.complete_rows() == std::vector<Index>{0, 2, 3, 5, 7});
}

TEST_CASE("dataset validation") {
  const auto st = toy_state();
  Rng rng(4);
  MaskedDataset d = toy_data(3, rng);
  d.mask.row(2).setZero();
  CHECK_THROWS_AS(d.validate(), ConfigError);
  CHECK_THROWS_AS(recover(st, d), ConfigError);
  d = toy_data(3, rng);
  d.mask(0, 0) = 0.5;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = toy_data(3, rng);
  d.views.push_back(d.views[1]);
  d.mask = Matrix::Ones(3, 3);
  CHECK_THROWS_AS(recover(st, d), UnsupportedError);
  d = toy_data(3, rng);
  d.views[1] = Matrix::Zero(4, 3);
  CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("assemble") {
  Rng rng(5);
  const Matrix a = test::random_matrix(4, 3, rng);
  const Matrix b = test::random_matrix(4, 3, rng);
  CHECK(assemble({a}) == a);
  const Matrix ab = assemble({a, b});
  CHECK(ab.rows() == 4);
  CHECK(ab.cols() == 6);
  CHECK(ab.leftCols(3) == a);
  CHECK(ab.rightCols(3) == b);
  CHECK_THROWS_AS(assemble({}), ShapeError);
  CHECK_THROWS_AS(assemble({a, Matrix(Matrix::Zero(3, 3))}), ShapeError);
}
