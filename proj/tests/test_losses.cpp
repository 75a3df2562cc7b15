// SPDX-License-Identifier: Apache-2.0
#include "herl/losses.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace herl;
using namespace herl::loss;

namespace {

// Plain-loop evaluation of the contrastive objective for a given similarity matrix.
double direct_contrastive(const Matrix& S, const Matrix& G, double tau) {
  const Index n = S.rows();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (Index j = 0; j < n; ++j) mx = std::max(mx, S(i, j) / tau);
    double z = 0.0;
    for (Index j = 0; j < n; ++j) z += std::exp(S(i, j) / tau - mx);
    for (Index j = 0; j < n; ++j) total += G(i, j) * (S(i, j) / tau - mx - std::log(z));
  }
  return -total / static_cast<double>(n);
}

Matrix cosine(const Matrix& U, const Matrix& V) {
  Matrix S(U.rows(), V.rows());
  for (Index i = 0; i < U.rows(); ++i)
    for (Index j = 0; j < V.rows(); ++j) S(i, j) = U.row(i).dot(V.row(j)) / (U.row(i).norm() * V.row(j).norm());
  return S;
}

Matrix neg_distance(const Matrix& U, const Matrix& V, double c) {
  Matrix S(U.rows(), V.rows());
  for (Index i = 0; i < U.rows(); ++i)
    for (Index j = 0; j < V.rows(); ++j)
      S(i, j) = -hyp::hyp_distance(hyp::BallPoint(U.row(i).transpose(), c), hyp::BallPoint(V.row(j).transpose(), c));
  return S;
}

struct Toy {
  model::ModelState state;
  ad::Tape tape;
  model::ForwardPass pass;
  std::vector<affinity::AffinityGraph> graphs;
};

std::unique_ptr<Toy> toy_batch() {
  model::ModelSpec spec;
  spec.input_dims = {3, 4};
  spec.hidden = {5};
  spec.embed_dim = 4;
  spec.prototypes = 3;
  spec.hyp.c = 0.1;
  spec.seed = 11;
  auto toy = std::make_unique<Toy>();
  toy->state = model::init_model(spec);
  Rng rng(12);
  for (auto& enc : toy->state.teacher)
    for (auto& l : enc) l.W += 0.1 * test::random_matrix(l.W.rows(), l.W.cols(), rng);
  const std::vector<Matrix> batch = {test::random_matrix(4, 3, rng), test::random_matrix(4, 4, rng)};
  toy->pass = model::forward_views(toy->tape, toy->state, batch);
  affinity::GraphConfig g;
  g.sigma = 1.0;
  g.warmup_epochs = 0;
  for (const auto& v : toy->pass.views) toy->graphs.push_back(affinity::build_graph(v.Ft.value(), g, 1));
  return toy;
}

}  // namespace

TEST_CASE("contrastive reference values") {
  ad::Tape t;
  Matrix one(1, 2);
  one << 0.3, 0.4;
  CHECK(contrastive(t.leaf(one), t.constant(one), Matrix::Ones(1, 1), Similarity::Cosine, 0.5).scalar() == 0.0);

  Matrix same(2, 2);
  same << 1.0, 1.0, 1.0, 1.0;
  CHECK(contrastive(t.leaf(same), t.constant(same), Matrix::Identity(2, 2), Similarity::Cosine, 0.5).scalar() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const Matrix I = Matrix::Identity(2, 2);
  CHECK(contrastive(t.leaf(I), t.constant(I), I, Similarity::Cosine, 0.5).scalar() ==
        doctest::Approx(0.1269280110429725).epsilon(1e-14));
}

TEST_CASE("contrastive matches the plain-loop oracle") {
  Rng rng(21);
  for (Index n : {1, 2, 4, 8}) {
    const Matrix U = test::random_matrix(n, 3, rng);
    const Matrix V = test::random_matrix(n, 3, rng);
    const Matrix G = n == 1 ? Matrix::Ones(1, 1) : Matrix(0.5 * Matrix::Identity(n, n) + Matrix::Constant(n, n, 0.5 / n));
    ad::Tape t;
    const double got = contrastive(t.leaf(U), t.constant(V), G, Similarity::Cosine, 0.5).scalar();
    CHECK(got == doctest::Approx(direct_contrastive(cosine(U, V), G, 0.5)).epsilon(1e-12));

    const Matrix P = 0.5 * U;
    const Matrix Q = 0.5 * V;
    const double gotd = contrastive(t.leaf(P), t.constant(Q), G, Similarity::HypDistance, 1.0, {.c = 1.0}).scalar();
    CHECK(gotd == doctest::Approx(direct_contrastive(neg_distance(P, Q, 1.0), G, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("contrastive error paths") {
  ad::Tape t;
  ad::Var u = t.leaf(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(contrastive(u, u, Matrix::Identity(2, 2), Similarity::Cosine, 0.0), ConfigError);
  CHECK_THROWS_AS(contrastive(u, t.leaf(Matrix::Ones(3, 3)), Matrix::Identity(2, 2), Similarity::Cosine, 0.5),
                  ShapeError);
  CHECK_THROWS_AS(contrastive(u, u, Matrix::Identity(3, 3), Similarity::Cosine, 0.5), ShapeError);
}

TEST_CASE("alpha schedule and instance mix") {
  const AlphaSchedule s{0.2, 100};
  CHECK(alpha_at(0, s) == 0.0);
  CHECK(alpha_at(100, s) == doctest::Approx(0.2));
  CHECK(alpha_at(50, s) == doctest::Approx(0.1));
  CHECK_THROWS_AS(alpha_at(101, s), ConfigError);

  ad::Tape t;
  ad::Var a = t.leaf(Matrix::Constant(1, 1, 0.2));
  ad::Var d = t.leaf(Matrix::Constant(1, 1, 0.4));
  CHECK(instance_loss(a, d, 0.0).scalar() == doctest::Approx(0.2));
  CHECK(instance_loss(a, d, 1.0).scalar() == doctest::Approx(0.4));
  CHECK(instance_loss(a, d, 0.5).scalar() == doctest::Approx(0.3));
  CHECK_THROWS_AS(instance_loss(a, d, 1.5), ConfigError);
}

TEST_CASE("distance loss closed form") {
  // Two samples: D(q_i, q_i) = 0, D(q_0, q_1) = ln 3 (origin and (0.5, 0) at c = 1).
  ad::Tape t;
  Matrix Q(2, 2);
  Q << 0.0, 0.0, 0.5, 0.0;
  std::vector<model::ViewOutputs> views(2);
  for (auto& v : views) {
    v.Q_hat = t.leaf(Q);
    v.Q = t.constant(Q);
  }
  LossConfig cfg;
  cfg.tau_dist = 1.0;
  const double per_pair = std::log(4.0 / 3.0);
  CHECK(distance_loss(views, cfg, {.c = 1.0}).scalar() == doctest::Approx(2.0 * per_pair).epsilon(1e-7));
  std::swap(views[0], views[1]);
  CHECK(distance_loss(views, cfg, {.c = 1.0}).scalar() == doctest::Approx(2.0 * per_pair).epsilon(1e-7));

  Matrix single(1, 2);
  single << 0.1, 0.2;
  for (auto& v : views) {
    v.Q_hat = t.leaf(single);
    v.Q = t.constant(single);
  }
  CHECK(distance_loss(views, cfg, {.c = 1.0}).scalar() == 0.0);
}

TEST_CASE("prototype loss") {
  ad::Tape t;
  // orthogonal columns, identical views
  const Matrix P = 0.5 * Matrix::Identity(2, 2);
  std::vector<model::ViewOutputs> views(2);
  for (auto& v : views) {
    v.P_hat = t.leaf(P);
    v.P = t.constant(P);
  }
  CHECK(prototype_loss(views, 0.5).scalar() == doctest::Approx(2.0 * 0.1269280110429725).epsilon(1e-14));

  Matrix col(3, 1);
  col << 0.1, -0.2, 0.3;
  for (auto& v : views) {
    v.P_hat = t.leaf(col);
    v.P = t.constant(col);
  }
  CHECK(prototype_loss(views, 0.5).scalar() == 0.0);

  // row permutation applied to both views leaves the value unchanged
  Rng rng(9);
  const Matrix A = test::random_matrix(5, 3, rng);
  const Matrix B = test::random_matrix(5, 3, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  views[0].P_hat = t.leaf(A);
  views[0].P = t.constant(A);
  views[1].P_hat = t.leaf(B);
  views[1].P = t.constant(B);
  const double base = prototype_loss(views, 0.5).scalar();
  views[0].P_hat = t.leaf(perm * A);
  views[0].P = t.constant(perm * A);
  views[1].P_hat = t.leaf(perm * B);
  views[1].P = t.constant(perm * B);
  CHECK(prototype_loss(views, 0.5).scalar() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("angular loss uses cosine on ball coordinates and is scale-free") {
  auto toy = toy_batch();
  const auto& v = toy->pass.views;
  LossConfig cfg;
  const double expect = direct_contrastive(cosine(v[0].Q_hat.value(), v[1].Q.value()), toy->graphs[1].G, cfg.tau) +
                        direct_contrastive(cosine(v[1].Q_hat.value(), v[0].Q.value()), toy->graphs[0].G, cfg.tau);
  CHECK(angular_loss(toy->pass.views, toy->graphs, cfg).scalar() == doctest::Approx(expect).epsilon(1e-12));

  // doubling Z below the clip threshold keeps every direction
  ad::Tape t;
  hyp::HypConfig h{.c = 0.1, .cr = 100.0};
  Rng rng(10);
  const Matrix Z = test::random_matrix(4, 3, rng);
  const Matrix F = test::random_matrix(4, 3, rng);
  std::vector<model::ViewOutputs> a(2), b(2);
  for (int k = 0; k < 2; ++k) {
    a[k].Q_hat = ad::hyp_project_rows(t.leaf(Z), h);
    b[k].Q_hat = ad::hyp_project_rows(t.leaf(2.0 * Z), h);
    a[k].Q = b[k].Q = ad::hyp_project_rows(t.constant(F), h);
  }
  const std::vector<affinity::AffinityGraph> gs(2, affinity::AffinityGraph::identity(4));
  CHECK(angular_loss(a, gs, cfg).scalar() == doctest::Approx(angular_loss(b, gs, cfg).scalar()).epsilon(1e-12));
}

TEST_CASE("backbone has within-view and cross-view terms") {
  auto toy = toy_batch();
  const auto& v = toy->pass.views;
  const auto& g = toy->graphs;
  LossConfig cfg;
  const double expect = direct_contrastive(cosine(v[0].F.value(), v[0].Ft.value()), g[0].G, cfg.tau) +
                        direct_contrastive(cosine(v[1].F.value(), v[1].Ft.value()), g[1].G, cfg.tau) +
                        direct_contrastive(cosine(v[0].Z.value(), v[1].Ft.value()), g[1].G, cfg.tau) +
                        direct_contrastive(cosine(v[1].Z.value(), v[0].Ft.value()), g[0].G, cfg.tau);
  CHECK(euclidean_backbone_loss(v, g, cfg).scalar() == doctest::Approx(expect).epsilon(1e-12));
  const std::vector<affinity::AffinityGraph> short_graphs(1, g[0]);
  CHECK_THROWS_AS(euclidean_backbone_loss(v, short_graphs, cfg), ShapeError);
}

TEST_CASE("total loss recomposes its parts") {
  auto toy = toy_batch();
  LossConfig cfg;
  cfg.beta = 0.3;
  const hyp::HypConfig& h = toy->state.spec.hyp;
  const double alpha = 0.4;
  const LossTerms terms = total_loss(toy->pass.views, toy->graphs, cfg, h, alpha);
  const double con = euclidean_backbone_loss(toy->pass.views, toy->graphs, cfg).scalar();
  const double ang = angular_loss(toy->pass.views, toy->graphs, cfg).scalar();
  const double dis = distance_loss(toy->pass.views, cfg, h).scalar();
  const double pro = prototype_loss(toy->pass.views, cfg.tau).scalar();
  CHECK(terms.con.scalar() == con);
  CHECK(terms.total.scalar() ==
        doctest::Approx(con + (1 - alpha) * ang + alpha * dis + cfg.beta * pro).epsilon(1e-12));

  cfg.beta = 0.0;
  CHECK(total_loss(toy->pass.views, toy->graphs, cfg, h, alpha).total.scalar() ==
        doctest::Approx(con + (1 - alpha) * ang + alpha * dis).epsilon(1e-12));

  cfg.use_ang = cfg.use_dis = cfg.use_pro = false;
  const LossTerms bare = total_loss(toy->pass.views, toy->graphs, cfg, h, alpha);
  CHECK(!bare.ang.valid());
  CHECK(!bare.pro.valid());
  CHECK(bare.total.scalar() == con);
  CHECK_THROWS_AS(total_loss(toy->pass.views, toy->graphs, cfg, h, -0.1), ConfigError);
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.alpha_final = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.beta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
