// SPDX-License-Identifier: Apache-2.0
#include "herl/losses.hpp"

namespace herl::loss {

void LossConfig::validate() const {
  if (!(tau > 0.0) || !(tau_dist > 0.0)) throw ConfigError("loss: temperatures must be positive");
  if (!(beta >= 0.0)) throw ConfigError("loss: beta must be >= 0");
  if (!(alpha_final >= 0.0 && alpha_final <= 1.0)) throw ConfigError("loss: alpha_final must lie in [0, 1]");
}

double alpha_at(int epoch, const AlphaSchedule& sched) {
  if (sched.total_epochs <= 0) return sched.alpha_final;
  if (epoch < 0 || epoch > sched.total_epochs) throw ConfigError("alpha_at: epoch outside [0, E]");
  return sched.alpha_final * static_cast<double>(epoch) / static_cast<double>(sched.total_epochs);
}

ad::Var contrastive(const ad::Var& U, const ad::Var& V, const Matrix& G, Similarity sim, double tau,
                    const hyp::HypConfig& hyp) {
  if (!(tau > 0.0)) throw ConfigError("contrastive: temperature must be positive");
  if (U.rows() != V.rows() || U.cols() != V.cols())
    throw ShapeError("contrastive: U is " + shape_str(U.rows(), U.cols()) + " but V is " + shape_str(V.rows(), V.cols()));
  const Index n = U.rows();
  if (n == 0) throw ShapeError("contrastive: empty batch");
  if (G.rows() != n || G.cols() != n)
    throw ShapeError("contrastive: graph is " + shape_str(G.rows(), G.cols()) + " for a batch of " + std::to_string(n));
  ad::Var S;
  switch (sim) {
    case Similarity::Cosine:
    case Similarity::Angular:
      S = ad::cosine_pairwise(U, V);
      break;
    case Similarity::HypDistance:
      S = ad::scale(ad::hyp_distance_pairwise(U, V, hyp.c, hyp.eps), -1.0);
      break;
  }
  ad::Var log_p = ad::row_logsoftmax(ad::scale(S, 1.0 / tau));
  return ad::scale(ad::weighted_sum(log_p, G), -1.0 / static_cast<double>(n));
}

namespace {

void require_graphs(const std::vector<model::ViewOutputs>& views, const std::vector<affinity::AffinityGraph>& graphs) {
  if (graphs.size() != views.size())
    throw ShapeError("loss: " + std::to_string(views.size()) + " views but " + std::to_string(graphs.size()) +
                     " affinity graphs");
}

ad::Var accumulate(const ad::Var& acc, const ad::Var& term) { return acc.valid() ? ad::add(acc, term) : term; }

}  // namespace

ad::Var euclidean_backbone_loss(const std::vector<model::ViewOutputs>& views,
                                const std::vector<affinity::AffinityGraph>& graphs, const LossConfig& cfg) {
  require_graphs(views, graphs);
  ad::Var total;
  for (std::size_t v = 0; v < views.size(); ++v)
    total = accumulate(total, contrastive(views[v].F, views[v].Ft, graphs[v].G, Similarity::Cosine, cfg.tau));
  for (std::size_t v = 0; v < views.size(); ++v)
    for (std::size_t u = 0; u < views.size(); ++u) {
      if (u == v) continue;
      total = accumulate(total, contrastive(views[v].Z, views[u].Ft, graphs[u].G, Similarity::Cosine, cfg.tau));
    }
  return total;
}

ad::Var angular_loss(const std::vector<model::ViewOutputs>& views, const std::vector<affinity::AffinityGraph>& graphs,
                     const LossConfig& cfg) {
  require_graphs(views, graphs);
  if (views.size() < 2) throw ShapeError("angular_loss: needs at least two views");
  ad::Var total;
  for (std::size_t v = 0; v < views.size(); ++v)
    for (std::size_t u = 0; u < views.size(); ++u) {
      if (u == v) continue;
      total = accumulate(total, contrastive(views[v].Q_hat, views[u].Q, graphs[u].G, Similarity::Angular, cfg.tau));
    }
  return total;
}

ad::Var distance_loss(const std::vector<model::ViewOutputs>& views, const LossConfig& cfg, const hyp::HypConfig& hyp) {
  if (views.size() < 2) throw ShapeError("distance_loss: needs at least two views");
  const Index n = views.front().Q_hat.rows();
  const Matrix identity = Matrix::Identity(n, n);
  ad::Var total;
  for (std::size_t v = 0; v < views.size(); ++v)
    for (std::size_t u = 0; u < views.size(); ++u) {
      if (u == v) continue;
      total = accumulate(total,
                         contrastive(views[v].Q_hat, views[u].Q, identity, Similarity::HypDistance, cfg.tau_dist, hyp));
    }
  return total;
}

ad::Var instance_loss(const ad::Var& angular, const ad::Var& distance, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("instance_loss: alpha must lie in [0, 1]");
  return ad::add(ad::scale(distance, alpha), ad::scale(angular, 1.0 - alpha));
}

ad::Var prototype_loss(const std::vector<model::ViewOutputs>& views, double tau) {
  if (views.size() < 2) throw ShapeError("prototype_loss: needs at least two views");
  const Index k = views.front().P_hat.cols();
  const Matrix identity = Matrix::Identity(k, k);
  ad::Var total;
  for (std::size_t v = 0; v < views.size(); ++v)
    for (std::size_t u = 0; u < views.size(); ++u) {
      if (u == v) continue;
      total = accumulate(total, contrastive(ad::transpose(views[v].P_hat), ad::transpose(views[u].P), identity,
                                            Similarity::Angular, tau));
    }
  return total;
}

LossTerms total_loss(const std::vector<model::ViewOutputs>& views, const std::vector<affinity::AffinityGraph>& graphs,
                     const LossConfig& cfg, const hyp::HypConfig& hyp, double alpha) {
  cfg.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("total_loss: alpha must lie in [0, 1]");
  LossTerms terms;
  terms.alpha = alpha;
  terms.con = euclidean_backbone_loss(views, graphs, cfg);
  ad::Var total = terms.con;
  if (cfg.use_ang) {
    terms.ang = angular_loss(views, graphs, cfg);
    total = ad::add(total, ad::scale(terms.ang, 1.0 - alpha));
  }
  if (cfg.use_dis) {
    terms.dis = distance_loss(views, cfg, hyp);
    total = ad::add(total, ad::scale(terms.dis, alpha));
  }
  if (cfg.use_pro) {
    terms.pro = prototype_loss(views, cfg.tau);
    total = ad::add(total, ad::scale(terms.pro, cfg.beta));
  }
  terms.total = total;
  return terms;
}

}  // namespace herl::loss
