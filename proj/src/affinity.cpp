// SPDX-License-Identifier: Apache-2.0
#include "herl/affinity.hpp"

#include <cmath>

namespace herl::affinity {

void GraphConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("graph: sigma must be positive");
  if (steps < 1) throw ConfigError("graph: walk steps must be >= 1");
  if (!(xi >= 0.0 && xi <= 1.0)) throw ConfigError("graph: xi must lie in [0, 1]");
  if (warmup_epochs < 0) throw ConfigError("graph: warmup_epochs must be >= 0");
}

Matrix heat_kernel_adjacency(const Matrix& features, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("heat_kernel_adjacency: sigma must be positive");
  if (!features.allFinite()) throw NumericError("heat_kernel_adjacency: non-finite features");
  const Index n = features.rows();
  Matrix A(n, n);
  for (Index i = 0; i < n; ++i) {
    A(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double d2 = (features.row(i) - features.row(j)).squaredNorm();
      A(i, j) = A(j, i) = std::exp(-d2 / sigma);
    }
  }
  return A;
}

Matrix row_normalize(const Matrix& A) {
  Vector sums = A.rowwise().sum();
  for (Index i = 0; i < sums.size(); ++i)
    if (!(sums(i) > 0.0)) throw NumericError("row_normalize: row " + std::to_string(i) + " has no positive mass");
  return sums.cwiseInverse().asDiagonal() * A;
}

AffinityGraph random_walk_graph(const Matrix& T, const GraphConfig& cfg, int epoch) {
  cfg.validate();
  if (T.rows() != T.cols()) throw ShapeError("random_walk_graph: transition matrix must be square");
  const Index n = T.rows();
  if (epoch <= cfg.warmup_epochs) return AffinityGraph::identity(n);
  if ((T.array() < 0.0).any()) throw ConfigError("random_walk_graph: negative transition probability");
  if (((T.rowwise().sum().array() - 1.0).abs() > 1e-9).any())
    throw ConfigError("random_walk_graph: transition matrix is not row-stochastic");
  Matrix power = T;
  for (int s = 1; s < cfg.steps; ++s) power = power * T;
  Matrix G = (1.0 - cfg.xi) * power;
  G.diagonal().array() += cfg.xi;
  return {std::move(G)};
}

AffinityGraph build_graph(const Matrix& teacher_features, const GraphConfig& cfg, int epoch) {
  cfg.validate();
  if (epoch <= cfg.warmup_epochs) return AffinityGraph::identity(teacher_features.rows());
  return random_walk_graph(row_normalize(heat_kernel_adjacency(teacher_features, cfg.sigma)), cfg, epoch);
}

}  // namespace herl::affinity
