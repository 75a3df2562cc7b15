// SPDX-License-Identifier: Apache-2.0
#include "herl/clustereval.hpp"

#include "herl/parallel.hpp"
#include "herl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace herl::cluster {

namespace {

ClusterResult lloyd(const Matrix& X, int k, int max_iter, std::uint64_t seed) {
  const Index n = X.rows();
  Rng rng(seed);

  // k-means++ seeding
  Matrix centroids(k, X.cols());
  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Index pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = d2.sum();
      if (total > 0.0) {
        double target = rng.uniform() * total;
        pick = n - 1;
        for (Index i = 0; i < n; ++i) {
          target -= d2(i);
          if (target < 0.0 && d2(i) > 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        // every point coincides with a centre already; take any unused one
        std::vector<Index> free;
        for (Index i = 0; i < n; ++i)
          if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
        pick = free[rng.below(free.size())];
      }
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    centroids.row(c) = X.row(pick);
    for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (X.row(i) - centroids.row(c)).squaredNorm());
  }

  ClusterResult res;
  res.assignments.assign(static_cast<std::size_t>(n), -1);
  Vector dist(n);
  for (int iter = 0; iter < std::max(1, max_iter); ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (X.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist(i) = best_d;
      inertia += best_d;
      auto& a = res.assignments[static_cast<std::size_t>(i)];
      if (a != best) {
        a = best;
        changed = true;
      }
    }
    res.inertia_trace.push_back(inertia);
    res.iterations = iter + 1;
    if (!changed && iter > 0) break;

    Matrix sums = Matrix::Zero(k, X.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const int a = res.assignments[static_cast<std::size_t>(i)];
      sums.row(a) += X.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // empty cluster: move it onto the point farthest from its centre
      Index far = 0;
      dist.maxCoeff(&far);
      centroids.row(c) = X.row(far);
      dist(far) = 0.0;
    }
  }
  // final inertia against the final centroids and assignments
  res.centroids = centroids;
  res.inertia = 0.0;
  for (Index i = 0; i < n; ++i)
    res.inertia += (X.row(i) - centroids.row(res.assignments[static_cast<std::size_t>(i)])).squaredNorm();
  return res;
}

struct DenseLabels {
  std::vector<int> ids;
  int count = 0;
};

DenseLabels densify(std::span<const int> labels) {
  std::map<int, int> remap;
  for (int l : labels) remap.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : remap) id = next++;
  DenseLabels out;
  out.count = next;
  out.ids.reserve(labels.size());
  for (int l : labels) out.ids.push_back(remap[l]);
  return out;
}

struct Contingency {
  Matrix table;  ///< classes x clusters
  DenseLabels a;
  DenseLabels b;
};

Contingency contingency(std::span<const int> y_true, std::span<const int> y_pred, const char* who) {
  if (y_true.size() != y_pred.size()) throw ShapeError(std::string(who) + ": label vectors differ in length");
  if (y_true.empty()) throw ConfigError(std::string(who) + ": empty label vectors");
  Contingency c{Matrix(), densify(y_true), densify(y_pred)};
  c.table = Matrix::Zero(c.a.count, c.b.count);
  for (std::size_t i = 0; i < y_true.size(); ++i) c.table(c.a.ids[i], c.b.ids[i]) += 1.0;
  return c;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

double entropy(const Vector& counts, double n) {
  double h = 0.0;
  for (Index i = 0; i < counts.size(); ++i)
    if (counts(i) > 0.0) {
      const double p = counts(i) / n;
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace

ClusterResult kmeans(const Matrix& X, const KMeansOptions& opts) {
  if (X.rows() == 0) throw ConfigError("kmeans: empty input");
  if (opts.k < 1 || opts.k > X.rows())
    throw ConfigError("kmeans: k = " + std::to_string(opts.k) + " must lie in [1, " + std::to_string(X.rows()) + "]");
  if (!X.allFinite()) throw NumericError("kmeans: non-finite input");
  const std::size_t restarts = static_cast<std::size_t>(std::max(1, opts.restarts));
  std::vector<ClusterResult> runs(restarts);
  parallel_for(restarts, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) runs[r] = lloyd(X, opts.k, opts.max_iter, derive_seed(opts.seed, r));
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;
  return std::move(runs[best]);
}

std::vector<int> solve_assignment(const Matrix& cost) {
  const Index n = cost.rows();
  const Index m = cost.cols();
  if (n > m) throw ShapeError("solve_assignment: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials u (rows), v (columns); p[j] = row matched to column j.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = static_cast<int>(j - 1);
  return row_to_col;
}

double hungarian_acc(std::span<const int> y_true, std::span<const int> y_pred) {
  const Contingency c = contingency(y_true, y_pred, "hungarian_acc");
  // clusters (rows) matched to classes (columns), padded to a square profit matrix
  const Index size = std::max(c.table.rows(), c.table.cols());
  Matrix cost = Matrix::Zero(size, size);
  cost.topLeftCorner(c.table.cols(), c.table.rows()) = -c.table.transpose();
  const std::vector<int> match = solve_assignment(cost);
  double matched = 0.0;
  for (Index r = 0; r < size; ++r) matched -= cost(r, match[static_cast<std::size_t>(r)]);
  return matched / static_cast<double>(y_true.size());
}

double nmi(std::span<const int> y_true, std::span<const int> y_pred) {
  const Contingency c = contingency(y_true, y_pred, "nmi");
  const double n = static_cast<double>(y_true.size());
  const Vector rows = c.table.rowwise().sum();
  const Vector cols = c.table.colwise().sum().transpose();
  const double ha = entropy(rows, n);
  const double hb = entropy(cols, n);
  if (ha == 0.0 || hb == 0.0) return (c.a.count == 1 && c.b.count == 1) ? 1.0 : 0.0;
  double mi = 0.0;
  for (Index i = 0; i < c.table.rows(); ++i)
    for (Index j = 0; j < c.table.cols(); ++j) {
      const double nij = c.table(i, j);
      if (nij > 0.0) mi += nij / n * std::log(n * nij / (rows(i) * cols(j)));
    }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

double ari(std::span<const int> y_true, std::span<const int> y_pred) {
  const Contingency c = contingency(y_true, y_pred, "ari");
  const double n = static_cast<double>(y_true.size());
  double index = 0.0;
  for (Index i = 0; i < c.table.size(); ++i) index += comb2(c.table.data()[i]);
  double sum_a = 0.0, sum_b = 0.0;
  const Vector rows = c.table.rowwise().sum();
  const Vector cols = c.table.colwise().sum().transpose();
  for (Index i = 0; i < rows.size(); ++i) sum_a += comb2(rows(i));
  for (Index j = 0; j < cols.size(); ++j) sum_b += comb2(cols(j));
  const double total = comb2(n);
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

Metrics score(std::span<const int> y_true, std::span<const int> y_pred) {
  return {hungarian_acc(y_true, y_pred), nmi(y_true, y_pred), ari(y_true, y_pred)};
}

}  // namespace herl::cluster
