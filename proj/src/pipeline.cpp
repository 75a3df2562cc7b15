// SPDX-License-Identifier: Apache-2.0
#include "herl/pipeline.hpp"

#include "herl/affinity.hpp"
#include "herl/losses.hpp"
#include "herl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace herl::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0.0)) throw ConfigError("adam: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: betas must lie in [0, 1)");
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter count changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    if (g.rows() != m_[i].rows() || g.cols() != m_[i].cols()) throw ShapeError("adam: gradient shape drift");
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    *params[i] -= (lr_ * (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps_)).matrix();
  }
}

std::string format_log_row(const EpochLog& r) {
  using data::format_double;
  return std::to_string(r.epoch) + "," + format_double(r.con) + "," + format_double(r.ang) + "," +
         format_double(r.dis) + "," + format_double(r.pro) + "," + format_double(r.alpha) + "," +
         format_double(r.total);
}

model::ModelSpec model_spec(const config::RunConfig& cfg, const impute::MaskedDataset& data) {
  model::ModelSpec spec;
  for (const Matrix& x : data.views) spec.input_dims.push_back(x.cols());
  spec.hidden = cfg.hidden;
  spec.embed_dim = cfg.embed_dim;
  spec.prototypes = cfg.prototypes;
  spec.hyp = cfg.hyp;
  spec.seed = cfg.seed;
  spec.prototype_softmax = cfg.prototype_softmax;
  return spec;
}

namespace {

double value_or_zero(const ad::Var& v) { return v.valid() ? v.scalar() : 0.0; }

std::vector<Matrix*> student_params(model::ModelState& state) {
  std::vector<Matrix*> out;
  state.for_each_student([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

TrainResult train(const config::RunConfig& cfg, const impute::MaskedDataset& data, const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  TrainResult res{model::init_model(model_spec(cfg, data), cfg.momentum), {}};
  model::ModelState& state = res.state;

  const std::vector<Index> complete = data.complete_rows();
  if (complete.size() < 2) throw ConfigError("train: fewer than two complete samples to train on");
  const auto batch = static_cast<std::size_t>(std::min<Index>(cfg.batch_size, static_cast<Index>(complete.size())));
  const loss::AlphaSchedule sched{cfg.loss.alpha_final, cfg.epochs};

  Adam adam(cfg.lr);
  std::vector<Matrix*> params = student_params(state);
  Rng shuffle_rng(derive_seed(cfg.seed, 0x5eed));
  std::vector<Index> order = complete;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double alpha = loss::alpha_at(epoch, sched);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog row;
    row.epoch = epoch;
    row.alpha = alpha;
    double weight = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t len = std::min(batch, order.size() - start);
      if (len < 2) continue;  // a single sample has no negatives
      std::vector<Matrix> xb;
      for (const Matrix& x : data.views) {
        Matrix part(static_cast<Index>(len), x.cols());
        for (std::size_t i = 0; i < len; ++i) part.row(static_cast<Index>(i)) = x.row(order[start + i]);
        xb.push_back(std::move(part));
      }
      try {
        ad::Tape tape;
        model::ForwardPass pass = model::forward_views(tape, state, xb);
        std::vector<affinity::AffinityGraph> graphs;
        for (const auto& v : pass.views) graphs.push_back(affinity::build_graph(v.Ft.value(), cfg.graph, epoch));
        const loss::LossTerms terms = loss::total_loss(pass.views, graphs, cfg.loss, state.spec.hyp, alpha);
        if (!std::isfinite(terms.total.scalar())) throw NumericError("non-finite total loss");
        tape.backward(terms.total);
        std::vector<Matrix> grads;
        for (const ad::Var& p : pass.student.flat()) {
          grads.push_back(p.grad());
          if (!grads.back().allFinite()) throw NumericError("non-finite gradient");
        }
        adam.step(params, grads);
        model::ema_update(state, cfg.momentum);

        const double w = static_cast<double>(len);
        row.con += w * terms.con.scalar();
        row.ang += w * value_or_zero(terms.ang);
        row.dis += w * value_or_zero(terms.dis);
        row.pro += w * value_or_zero(terms.pro);
        row.total += w * terms.total.scalar();
        weight += w;
      } catch (const NumericError& e) {
        throw NumericError("train: epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
      }
    }
    if (weight > 0.0) {
      row.con /= weight;
      row.ang /= weight;
      row.dis /= weight;
      row.pro /= weight;
      row.total /= weight;
    }
    res.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return res;
}

EvalResult evaluate(const model::ModelState& state, const data::Dataset& ds, const config::RunConfig& cfg) {
  ds.data.validate();
  if (static_cast<Index>(ds.labels.size()) != ds.data.samples())
    throw ShapeError("evaluate: " + std::to_string(ds.labels.size()) + " labels for " +
                     std::to_string(ds.data.samples()) + " samples");
  if (static_cast<Index>(ds.data.views.size()) != state.spec.views())
    throw ShapeError("evaluate: dataset has " + std::to_string(ds.data.views.size()) + " views, checkpoint expects " +
                     std::to_string(state.spec.views()));
  const Matrix features = impute::assemble(impute::recover(state, ds.data));
  EvalResult r;
  r.k = cfg.clusters > 0 ? cfg.clusters
                         : static_cast<int>(std::set<int>(ds.labels.begin(), ds.labels.end()).size());
  const cluster::ClusterResult km =
      cluster::kmeans(features, {r.k, cfg.seed, cfg.kmeans_restarts, cfg.kmeans_max_iter});
  r.inertia = km.inertia;
  r.assignments = km.assignments;
  r.metrics = cluster::score(ds.labels, km.assignments);
  return r;
}

std::string format_metrics_row(std::uint64_t seed, double eta, const EvalResult& r) {
  using data::format_double;
  return std::to_string(seed) + "," + format_double(eta) + "," + format_double(r.metrics.acc) + "," +
         format_double(r.metrics.nmi) + "," + format_double(r.metrics.ari) + "," + format_double(r.inertia);
}

void save_checkpoint(const fs::path& dir, const model::ModelState& state, const config::RunConfig& cfg) {
  fs::create_directories(dir / "params");
  const model::ModelSpec& s = state.spec;
  json manifest;
  manifest["format"] = "herl-checkpoint";
  manifest["version"] = 1;
  manifest["seed"] = s.seed;
  manifest["momentum"] = state.momentum;
  manifest["spec"] = {{"input_dims", s.input_dims},
                      {"hidden", s.hidden},
                      {"embed_dim", s.embed_dim},
                      {"prototypes", s.prototypes},
                      {"c", s.hyp.c},
                      {"cr", s.hyp.cr},
                      {"eps", s.hyp.eps},
                      {"prototype_softmax", s.prototype_softmax},
                      {"seed", s.seed}};
  json params = json::array();
  state.for_each_param([&](const std::string& name, const Matrix& m) {
    const std::string file = "params/" + name + ".csv";
    data::write_matrix_csv(m, dir / file);
    params.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"file", file}});
  });
  manifest["params"] = params;
  json conf = json::object();
  for (const auto& [k, v] : config::entries(cfg)) conf[k] = v;
  manifest["config"] = conf;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

model::ModelState load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("checkpoint " + dir.string() + " has no manifest.json");
  json manifest;
  try {
    manifest = json::parse(in);
    if (manifest.at("format") != "herl-checkpoint") throw IoError("not a checkpoint manifest");
    const json& js = manifest.at("spec");
    model::ModelSpec spec;
    spec.input_dims = js.at("input_dims").get<std::vector<Index>>();
    spec.hidden = js.at("hidden").get<std::vector<Index>>();
    spec.embed_dim = js.at("embed_dim").get<Index>();
    spec.prototypes = js.at("prototypes").get<Index>();
    spec.hyp.c = js.at("c").get<double>();
    spec.hyp.cr = js.at("cr").get<double>();
    spec.hyp.eps = js.at("eps").get<double>();
    spec.prototype_softmax = js.at("prototype_softmax").get<bool>();
    spec.seed = js.at("seed").get<std::uint64_t>();
    model::ModelState state = model::init_model(spec, manifest.at("momentum").get<double>());

    std::map<std::string, std::pair<std::string, std::pair<Index, Index>>> files;
    for (const json& p : manifest.at("params"))
      files[p.at("name").get<std::string>()] = {p.at("file").get<std::string>(),
                                                {p.at("rows").get<Index>(), p.at("cols").get<Index>()}};
    state.for_each_param([&](const std::string& name, Matrix& m) {
      const auto it = files.find(name);
      if (it == files.end()) throw IoError("checkpoint lacks parameter " + name);
      Matrix loaded = data::read_matrix_csv(dir / it->second.first);
      if (loaded.rows() != m.rows() || loaded.cols() != m.cols() || it->second.second.first != m.rows() ||
          it->second.second.second != m.cols())
        throw ShapeError("checkpoint parameter " + name + " is " + shape_str(loaded.rows(), loaded.cols()) +
                         ", spec implies " + shape_str(m.rows(), m.cols()));
      m = std::move(loaded);
    });
    return state;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// gradient checks

namespace {

Matrix uniform(Index r, Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform();
  return m;
}

/// Rows strictly inside the ball of curvature c (norm below 0.8 / sqrt c).
Matrix in_ball(Index r, Index c_dim, double c, Rng& rng) {
  Matrix m = uniform(r, c_dim, rng);
  for (Index i = 0; i < r; ++i) {
    const double target = 0.8 / std::sqrt(c) * rng.uniform();
    const double n = m.row(i).norm();
    if (n > 0.0) m.row(i) *= target / n;
  }
  return m;
}

struct OpCase {
  std::string name;
  std::function<std::vector<Matrix>(Rng&)> inputs;
  std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)> op;  ///< may return a matrix
};

std::vector<OpCase> op_cases() {
  const double c = 0.1;
  const hyp::HypConfig hc{c, 1.0, hyp::kDefaultEps};
  using V = std::span<const ad::Var>;
  auto two = [](Index r1, Index c1, Index r2, Index c2) {
    return [=](Rng& g) { return std::vector<Matrix>{uniform(r1, c1, g), uniform(r2, c2, g)}; };
  };
  auto one = [](Index r, Index cc, double lo = -1.0, double hi = 1.0) {
    return [=](Rng& g) { return std::vector<Matrix>{uniform(r, cc, g, lo, hi)}; };
  };
  auto ball2 = [c](Index r1, Index r2, Index d) {
    return [=](Rng& g) { return std::vector<Matrix>{in_ball(r1, d, c, g), in_ball(r2, d, c, g)}; };
  };
  return {
      {"add", two(3, 4, 3, 4), [](ad::Tape&, V in) { return ad::add(in[0], in[1]); }},
      {"sub", two(3, 4, 3, 4), [](ad::Tape&, V in) { return ad::sub(in[0], in[1]); }},
      {"mul", two(3, 4, 3, 4), [](ad::Tape&, V in) { return ad::mul(in[0], in[1]); }},
      {"scale", one(3, 4), [](ad::Tape&, V in) { return ad::scale(in[0], -1.7); }},
      {"add_row", two(3, 4, 1, 4), [](ad::Tape&, V in) { return ad::add_row(in[0], in[1]); }},
      {"matmul", two(3, 4, 4, 2), [](ad::Tape&, V in) { return ad::matmul(in[0], in[1]); }},
      {"transpose", one(3, 4), [](ad::Tape&, V in) { return ad::transpose(in[0]); }},
      {"affine",
       [](Rng& g) { return std::vector<Matrix>{uniform(3, 4, g), uniform(4, 2, g), uniform(1, 2, g)}; },
       [](ad::Tape&, V in) { return ad::affine(in[0], in[1], in[2]); }},
      {"relu", one(3, 4), [](ad::Tape&, V in) { return ad::relu(in[0]); }},
      {"tanh", one(3, 4, -2.0, 2.0), [](ad::Tape&, V in) { return ad::tanh_act(in[0]); }},
      {"exp", one(3, 4), [](ad::Tape&, V in) { return ad::exp_act(in[0]); }},
      {"l2_normalize_rows", one(3, 4), [](ad::Tape&, V in) { return ad::l2_normalize_rows(in[0]); }},
      {"row_logsoftmax", one(3, 4, -3.0, 3.0), [](ad::Tape&, V in) { return ad::row_logsoftmax(in[0]); }},
      {"sum", one(3, 4), [](ad::Tape&, V in) { return ad::sum(in[0]); }},
      {"mean", one(3, 4), [](ad::Tape&, V in) { return ad::mean(in[0]); }},
      {"clip_rows", one(4, 3, -1.5, 1.5), [hc](ad::Tape&, V in) { return ad::clip_rows(in[0], hc); }},
      {"exp_map_rows", one(4, 3, -2.0, 2.0), [hc](ad::Tape&, V in) { return ad::exp_map_rows(in[0], hc); }},
      {"hyp_project_rows", one(4, 3, -1.5, 1.5), [hc](ad::Tape&, V in) { return ad::hyp_project_rows(in[0], hc); }},
      {"mobius_add_rows", ball2(4, 4, 3), [c](ad::Tape&, V in) { return ad::mobius_add_rows(in[0], in[1], c); }},
      {"hyp_distance_rows", ball2(4, 4, 3),
       [c](ad::Tape&, V in) { return ad::hyp_distance_rows(in[0], in[1], c); }},
      {"hyp_distance_pairwise", ball2(3, 4, 3),
       [c](ad::Tape&, V in) { return ad::hyp_distance_pairwise(in[0], in[1], c); }},
      {"cosine_pairwise", two(3, 4, 5, 4), [](ad::Tape&, V in) { return ad::cosine_pairwise(in[0], in[1]); }},
      {"contrastive_cosine", two(4, 3, 4, 3),
       [](ad::Tape&, V in) {
         Matrix G = Matrix::Constant(4, 4, 0.1);
         G.diagonal().setConstant(0.7);
         return loss::contrastive(in[0], in[1], G, loss::Similarity::Cosine, 0.5);
       }},
      {"contrastive_hyp_distance", ball2(4, 4, 3),
       [hc](ad::Tape&, V in) {
         return loss::contrastive(in[0], in[1], Matrix::Identity(4, 4), loss::Similarity::HypDistance, 1.0, hc);
       }},
  };
}

}  // namespace

std::vector<GradCheckRow> gradcheck_ops(int points, std::uint64_t seed, double h) {
  if (points < 1) throw ConfigError("gradcheck: points must be >= 1");
  std::vector<GradCheckRow> rows;
  std::uint64_t stream = 0;
  for (const OpCase& oc : op_cases()) {
    Rng rng(derive_seed(seed, stream++));
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
      const std::vector<Matrix> inputs = oc.inputs(rng);
      // scalarize with a random weighting so every output entry counts
      Matrix weights;
      {
        ad::Tape probe;
        std::vector<ad::Var> vars;
        for (const Matrix& m : inputs) vars.push_back(probe.constant(m));
        const ad::Var out = oc.op(probe, vars);
        // magnitudes bounded away from zero: a near-zero weight makes a
        // near-zero gradient coordinate, where a relative error is only noise
        weights = uniform(out.rows(), out.cols(), rng, 0.5, 1.5);
        for (Index i = 0; i < weights.size(); ++i)
          if (rng.uniform() < 0.5) weights.data()[i] = -weights.data()[i];
      }
      worst = std::max(worst, ad::grad_check(
                                  [&](ad::Tape& t, std::span<const ad::Var> in) {
                                    return ad::weighted_sum(oc.op(t, in), weights);
                                  },
                                  inputs, h));
    }
    rows.push_back({oc.name, worst, 1e-5});
  }
  return rows;
}

GradCheckRow gradcheck_full_loss(std::uint64_t seed, double h) {
  Rng rng(seed);
  model::ModelSpec spec;
  spec.input_dims = {3, 4};
  spec.hidden = {5};
  spec.embed_dim = 4;
  spec.prototypes = 3;
  spec.hyp = {0.1, 1.0, hyp::kDefaultEps};
  spec.seed = seed;
  model::ModelState state = model::init_model(spec, 0.98);
  // a teacher that differs from the student, as it does mid-training
  for (auto& enc : state.teacher)
    for (auto& l : enc) {
      l.W += 0.1 * uniform(l.W.rows(), l.W.cols(), rng);
      l.b += 0.1 * uniform(l.b.rows(), l.b.cols(), rng);
    }
  const std::vector<Matrix> batch = {uniform(4, 3, rng), uniform(4, 4, rng)};

  affinity::GraphConfig gc;
  gc.sigma = 1.0;
  gc.warmup_epochs = 0;
  std::vector<affinity::AffinityGraph> graphs;
  for (Index v = 0; v < 2; ++v)
    graphs.push_back(affinity::build_graph(model::teacher_features(state, v, batch[static_cast<std::size_t>(v)]), gc, 1));
  const loss::LossConfig lc;
  const double alpha = 0.4;

  std::vector<Matrix> points;
  state.for_each_student([&](const std::string&, const Matrix& m) { points.push_back(m); });
  const double err = ad::grad_check(
      [&](ad::Tape& t, std::span<const ad::Var> in) {
        model::ForwardPass pass = model::forward_views(t, state, model::regroup_student(state.student, in), batch);
        return loss::total_loss(pass.views, graphs, lc, spec.hyp, alpha).total;
      },
      points, h);
  return {"full_objective", err, 1e-4};
}

// ---------------------------------------------------------------------------
// synthetic runs

data::Dataset make_synthetic(const config::RunConfig& cfg) {
  const data::SynthData sd = data::synth_tree_data(cfg.synth);
  data::Dataset ds;
  ds.data.views = sd.views;
  ds.data.mask = data::gen_mask(cfg.mask, sd.views.front().rows());
  ds.labels = sd.labels;
  return ds;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"backbone", false, false, false}, {"backbone+instance", true, true, false}, {"full", true, true, true}};
}

std::vector<AblationRow> run_ablation(const config::RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                      const AblationProgress& progress) {
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    config::RunConfig cfg = base;
    cfg.seed = seed;
    cfg.synth.seed = seed;
    cfg.mask.seed = seed;
    const data::Dataset ds = make_synthetic(cfg);
    const int k = static_cast<int>(std::set<int>(ds.labels.begin(), ds.labels.end()).size());
    const cluster::ClusterResult raw =
        cluster::kmeans(ds.data.views.front(), {k, seed, cfg.kmeans_restarts, cfg.kmeans_max_iter});
    const double view1_ari = cluster::ari(ds.labels, raw.assignments);
    for (const AblationVariant& v : ablation_variants()) {
      config::RunConfig run = cfg;
      run.loss.use_ang = v.use_ang;
      run.loss.use_dis = v.use_dis;
      run.loss.use_pro = v.use_pro;
      const TrainResult trained = train(run, ds.data);
      AblationRow row{v.name, seed, view1_ari, evaluate(trained.state, ds, run)};
      if (progress) progress(row);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace herl::pipeline
