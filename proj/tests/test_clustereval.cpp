// SPDX-License-Identifier: Apache-2.0
#include "herl/clustereval.hpp"
#include "metric_oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace herl;
using namespace herl::cluster;

using Labels = std::vector<int>;

TEST_CASE("accuracy") {
  const Labels t = {0, 0, 1, 1};
  CHECK(hungarian_acc(t, t) == 1.0);
  CHECK(hungarian_acc(t, Labels{1, 1, 0, 0}) == 1.0);
  CHECK(hungarian_acc(t, Labels{0, 1, 0, 1}) == 0.5);
  CHECK(hungarian_acc(t, Labels{7, 7, -3, -3}) == 1.0);
  CHECK(hungarian_acc(t, Labels{0, 0, 0, 0}) == 0.5);
  CHECK(hungarian_acc(t, Labels{0, 1, 2, 3}) == 0.5);
  CHECK_THROWS_AS(hungarian_acc(t, Labels{0, 1}), ShapeError);
  CHECK_THROWS_AS(hungarian_acc(Labels{}, Labels{}), ConfigError);
}

TEST_CASE("nmi") {
  const Labels t = {0, 0, 1, 1};
  CHECK(nmi(t, Labels{1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(nmi(t, Labels{0, 0, 0, 0}) == 0.0);
  CHECK(nmi(t, Labels{0, 0, 1, 2}) == doctest::Approx(0.816496580927726).epsilon(1e-14));
  CHECK(nmi(Labels{3, 3}, Labels{5, 5}) == 1.0);
}

TEST_CASE("ari") {
  const Labels t = {0, 0, 1, 1};
  CHECK(ari(t, t) == doctest::Approx(1.0));
  CHECK(ari(Labels{0, 1}, Labels{0, 0}) == 0.0);
  CHECK(ari(t, Labels{0, 0, 1, 2}) == doctest::Approx(0.5714285714285715).epsilon(1e-14));
  CHECK(ari(Labels{1, 1, 1}, Labels{2, 2, 2}) == 1.0);
}

TEST_CASE("metrics agree with brute-force references") {
  std::mt19937_64 gen(123);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 12);
    const int ka = 1 + static_cast<int>(gen() % 5);
    const int kb = 1 + static_cast<int>(gen() % 5);
    Labels t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
    for (auto& v : t) v = static_cast<int>(gen() % ka);
    for (auto& v : p) v = static_cast<int>(gen() % kb) * 3 - 2;
    CHECK(hungarian_acc(t, p) == doctest::Approx(test::brute_acc(t, p)).epsilon(1e-12));
    CHECK(nmi(t, p) == doctest::Approx(test::entropy_nmi(t, p)).epsilon(1e-10));
    CHECK(ari(t, p) == doctest::Approx(test::pair_ari(t, p)).epsilon(1e-10));
    const Metrics m = score(t, p);
    CHECK(m.acc == hungarian_acc(t, p));
    CHECK(m.nmi == nmi(t, p));
    CHECK(m.ari == ari(t, p));
  }
}

TEST_CASE("assignment solver") {
  Matrix cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  CHECK(solve_assignment(cost) == std::vector<int>{1, 0, 2});
  Matrix wide(2, 3);
  wide << 5, 1, 9, 1, 5, 9;
  CHECK(solve_assignment(wide) == std::vector<int>{1, 0});
  CHECK_THROWS_AS(solve_assignment(Matrix(wide.transpose())), ShapeError);
}

TEST_CASE("kmeans trivial cases") {
  Rng rng(1);
  const Matrix X = test::random_matrix(6, 2, rng);
  const ClusterResult all = kmeans(X, {.k = 6, .seed = 1});
  CHECK(all.inertia == doctest::Approx(0.0));
  Labels sorted = all.assignments;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == Labels{0, 1, 2, 3, 4, 5});

  const ClusterResult one = kmeans(X, {.k = 1, .seed = 1});
  CHECK((one.centroids.row(0) - X.colwise().mean()).norm() < 1e-14);
  CHECK(one.inertia == doctest::Approx((X.rowwise() - X.colwise().mean()).squaredNorm()));

  CHECK_THROWS_AS(kmeans(X, {.k = 0}), ConfigError);
  CHECK_THROWS_AS(kmeans(X, {.k = 7}), ConfigError);
  CHECK_THROWS_AS(kmeans(Matrix(0, 2), {.k = 1}), ConfigError);
  Matrix bad = X;
  bad(0, 0) = NAN;
  CHECK_THROWS_AS(kmeans(bad, {.k = 2}), NumericError);
}

TEST_CASE("kmeans separates distant blobs") {
  Rng rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix X(60, 3);
  Labels truth;
  for (Index i = 0; i < 60; ++i) {
    const int label = i % 2;
    for (Index j = 0; j < 3; ++j) X(i, j) = g(rng) + (j == 0 ? 10.0 * label : 0.0);
    truth.push_back(label);
  }
  const ClusterResult r = kmeans(X, {.k = 2, .seed = 3});
  // oracle: threshold on the separating axis
  Labels axis;
  for (Index i = 0; i < 60; ++i) axis.push_back(X(i, 0) > 5.0);
  CHECK(hungarian_acc(axis, r.assignments) == 1.0);
  CHECK(hungarian_acc(truth, r.assignments) == 1.0);
}

TEST_CASE("kmeans is deterministic and monotone") {
  Rng rng(4);
  const Matrix X = test::random_matrix(80, 4, rng);
  const ClusterResult a = kmeans(X, {.k = 5, .seed = 9});
  const ClusterResult b = kmeans(X, {.k = 5, .seed = 9});
  CHECK(a.assignments == b.assignments);
  CHECK(a.centroids == b.centroids);
  CHECK(a.inertia == b.inertia);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1] + 1e-12);
  // more restarts never do worse than the first restart alone
  CHECK(a.inertia <= kmeans(X, {.k = 5, .seed = 9, .restarts = 1}).inertia + 1e-12);
}

TEST_CASE("kmeans with duplicate points") {
  Matrix X = Matrix::Zero(5, 2);
  X.row(4) << 1.0, 1.0;
  const ClusterResult r = kmeans(X, {.k = 3, .seed = 0});
  CHECK(r.inertia == doctest::Approx(0.0));
  CHECK(std::set<int>(r.assignments.begin(), r.assignments.end()).size() >= 2);
}
