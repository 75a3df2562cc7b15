// SPDX-License-Identifier: Apache-2.0
//
// Training, evaluation, checkpoints and the batch jobs behind the CLI.
#pragma once

#include "herl/clustereval.hpp"
#include "herl/config.hpp"
#include "herl/dataio.hpp"
#include "herl/impute.hpp"
#include "herl/netmodel.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace herl::pipeline {

/// Adaptive-moment optimizer without weight decay.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// One update; params and grads pair up by position and keep their shapes
  /// across calls.
  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);
  int steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

inline constexpr const char* kTrainLogHeader = "epoch,l_con,l_ang,l_dis,l_pro,alpha,total";
inline constexpr const char* kMetricsHeader = "seed,eta,acc,nmi,ari,inertia";

/// Batch-size weighted means over one epoch; disabled terms log 0.
struct EpochLog {
  int epoch = 0;
  double con = 0.0, ang = 0.0, dis = 0.0, pro = 0.0;
  double alpha = 0.0;
  double total = 0.0;
};
std::string format_log_row(const EpochLog& row);

/// Model architecture for a config and the dataset's view widths.
model::ModelSpec model_spec(const config::RunConfig& cfg, const impute::MaskedDataset& data);

struct TrainResult {
  model::ModelState state;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Epochs 1..E over shuffled batches of the complete rows; per batch: forward,
/// affinity graphs from the teacher features, total loss, backward, Adam, EMA.
/// Throws NumericError (with epoch and batch) on a non-finite loss or gradient.
TrainResult train(const config::RunConfig& cfg, const impute::MaskedDataset& data, const EpochCallback& on_epoch = {});

struct EvalResult {
  cluster::Metrics metrics{};
  double inertia = 0.0;
  int k = 0;
  std::vector<int> assignments;
};

/// recover -> assemble -> kmeans -> metrics against ds.labels.
EvalResult evaluate(const model::ModelState& state, const data::Dataset& ds, const config::RunConfig& cfg);
std::string format_metrics_row(std::uint64_t seed, double eta, const EvalResult& r);

/// Directory with manifest.json plus one CSV per named parameter array.
void save_checkpoint(const std::filesystem::path& dir, const model::ModelState& state, const config::RunConfig& cfg);
model::ModelState load_checkpoint(const std::filesystem::path& dir);

struct GradCheckRow {
  std::string name;
  double rel_err;
  double tol;
  bool pass() const { return rel_err < tol; }
};

/// grad_check of every differentiable op (plus the contrastive loss in both
/// similarities) at `points` random smooth points, step h.
std::vector<GradCheckRow> gradcheck_ops(int points, std::uint64_t seed, double h = 1e-6);
/// Full objective on a 4-sample two-view toy batch against central differences.
GradCheckRow gradcheck_full_loss(std::uint64_t seed, double h = 1e-6);

struct AblationVariant {
  std::string name;
  bool use_ang;
  bool use_dis;
  bool use_pro;
};
/// backbone only; backbone + instance alignment; all terms.
std::vector<AblationVariant> ablation_variants();

struct AblationRow {
  std::string variant;
  std::uint64_t seed;
  double view1_ari;  ///< k-means on raw view 1 alone
  EvalResult result;
};

using AblationProgress = std::function<void(const AblationRow&)>;

/// Every variant trained and evaluated on synthetic data for every seed; the
/// seed drives data, mask and model. Other settings come from `base`.
std::vector<AblationRow> run_ablation(const config::RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                      const AblationProgress& progress = {});

/// Synthetic dataset (views, labels, mask) for a config.
data::Dataset make_synthetic(const config::RunConfig& cfg);

}  // namespace herl::pipeline
