// SPDX-License-Identifier: Apache-2.0
//
// k-means and the clustering metrics (ACC with optimal label matching, NMI,
// ARI). Labels may be arbitrary integers; they are densified internally.
#pragma once

#include "herl/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace herl::cluster {

struct KMeansOptions {
  int k = 2;
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iter = 300;
};

struct ClusterResult {
  std::vector<int> assignments;
  Matrix centroids;  ///< k x D
  double inertia = 0.0;
  int iterations = 0;
  /// Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_trace;
};

/// Lloyd iterations from k-means++ seeding; best restart by inertia (ties go
/// to the lower restart index). Restarts run in parallel with per-restart
/// seeds derived from `seed`, so the result depends only on the options.
/// Throws ConfigError for empty input or k outside [1, N].
ClusterResult kmeans(const Matrix& X, const KMeansOptions& opts);

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// shortest augmenting path with potentials. Returns the column of each row.
std::vector<int> solve_assignment(const Matrix& cost);

/// Best one-to-one cluster-to-class matching, matched count / N.
double hungarian_acc(std::span<const int> y_true, std::span<const int> y_pred);

/// I(a; b) / sqrt(H(a) H(b)) in nats. When an entropy is zero the score is 1
/// for two single-cluster partitions and 0 otherwise.
double nmi(std::span<const int> y_true, std::span<const int> y_pred);

/// Adjusted Rand index from the contingency table; 1 when the expected and
/// maximum index coincide (identical trivial partitions).
double ari(std::span<const int> y_true, std::span<const int> y_pred);

struct Metrics {
  double acc;
  double nmi;
  double ari;
};

Metrics score(std::span<const int> y_true, std::span<const int> y_pred);

}  // namespace herl::cluster
