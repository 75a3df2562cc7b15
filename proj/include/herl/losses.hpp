// SPDX-License-Identifier: Apache-2.0
//
// Affinity-guided contrastive objectives. Every term is an instance of
//
//   L(U, V; G; S) = -(1/N) sum_ij G_ij log softmax_j(S(u_i, v_.) / tau)
//
// with a different similarity S, target graph G and pair of arguments. Sums
// over "v != u" run over ordered view pairs.
#pragma once

#include "herl/affinity.hpp"
#include "herl/diffeng.hpp"
#include "herl/hypmath.hpp"
#include "herl/netmodel.hpp"

#include <vector>

namespace herl::loss {

enum class Similarity {
  Cosine,       ///< Euclidean cosine similarity
  Angular,      ///< cosine of ball coordinates (conformal, so the same formula)
  HypDistance,  ///< negative Poincare distance
};

struct LossConfig {
  double tau = 0.5;          ///< temperature for all cosine / angular terms
  double tau_dist = 1.0;     ///< temperature for the distance term
  double beta = 0.1;         ///< prototype term weight
  double alpha_final = 0.2;  ///< terminal value of the linear alpha ramp
  bool use_ang = true;
  bool use_dis = true;
  bool use_pro = true;

  void validate() const;
};

struct AlphaSchedule {
  double alpha_final = 0.2;
  int total_epochs = 500;
};

/// alpha_final * epoch / total_epochs. Throws ConfigError for epoch outside [0, E].
double alpha_at(int epoch, const AlphaSchedule& sched);

/// Generic contrastive loss. G must be N x N for N rows of U and V, and tau > 0.
/// `hyp` supplies curvature and eps for Similarity::HypDistance.
ad::Var contrastive(const ad::Var& U, const ad::Var& V, const Matrix& G, Similarity sim, double tau,
                    const hyp::HypConfig& hyp = {});

/// Within-view terms sum_v L(F^v, F_t^v; G^v) plus cross-view terms
/// sum_{v != u} L(Z^v, F_t^u; G^u), cosine similarity, temperature tau.
ad::Var euclidean_backbone_loss(const std::vector<model::ViewOutputs>& views,
                                const std::vector<affinity::AffinityGraph>& graphs, const LossConfig& cfg);

/// sum_{v != u} L(Q_hat^v, Q^u; G^u; angular).
ad::Var angular_loss(const std::vector<model::ViewOutputs>& views, const std::vector<affinity::AffinityGraph>& graphs,
                     const LossConfig& cfg);

/// sum_{v != u} L(Q_hat^v, Q^u; I; -D_H) at temperature tau_dist.
ad::Var distance_loss(const std::vector<model::ViewOutputs>& views, const LossConfig& cfg, const hyp::HypConfig& hyp);

/// alpha * distance + (1 - alpha) * angular.
ad::Var instance_loss(const ad::Var& angular, const ad::Var& distance, double alpha);

/// Columns of P_hat^v contrasted against columns of P^u (K units) with the
/// angular similarity, identity targets, summed over ordered view pairs.
ad::Var prototype_loss(const std::vector<model::ViewOutputs>& views, double tau);

struct LossTerms {
  ad::Var con;
  ad::Var ang;  ///< invalid when disabled
  ad::Var dis;  ///< invalid when disabled
  ad::Var pro;  ///< invalid when disabled
  ad::Var total;
  double alpha = 0.0;
};

/// con + [alpha dis + (1 - alpha) ang] + beta pro, dropping disabled terms
/// while keeping the same alpha weights.
LossTerms total_loss(const std::vector<model::ViewOutputs>& views, const std::vector<affinity::AffinityGraph>& graphs,
                     const LossConfig& cfg, const hyp::HypConfig& hyp, double alpha);

}  // namespace herl::loss
