// SPDX-License-Identifier: Apache-2.0
//
// Soft-supervision graph G = xi I + (1 - xi) T^t built from teacher features.
#pragma once

#include "herl/common.hpp"

namespace herl::affinity {

struct GraphConfig {
  double sigma = 0.1;      ///< heat-kernel temperature
  int steps = 3;           ///< random-walk length t
  double xi = 0.5;         ///< identity mixing weight
  int warmup_epochs = 100; ///< T is the identity while epoch <= warmup_epochs

  void validate() const;
};

/// Row-stochastic N x N soft-target matrix.
struct AffinityGraph {
  Matrix G;

  static AffinityGraph identity(Index n) { return {Matrix::Identity(n, n)}; }
};

/// A_ij = exp(-|f_i - f_j|^2 / sigma). Symmetric with unit diagonal.
Matrix heat_kernel_adjacency(const Matrix& features, double sigma);

/// T_ij = A_ij / sum_l A_il. Throws NumericError on a zero row.
Matrix row_normalize(const Matrix& A);

/// xi I + (1 - xi) T^t, with T replaced by I while epoch <= warmup_epochs.
/// Throws ConfigError when T is not row-stochastic.
AffinityGraph random_walk_graph(const Matrix& T, const GraphConfig& cfg, int epoch);

/// Full construction from teacher features; skips the kernel during warmup.
AffinityGraph build_graph(const Matrix& teacher_features, const GraphConfig& cfg, int epoch);

}  // namespace herl::affinity
