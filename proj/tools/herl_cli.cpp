// SPDX-License-Identifier: Apache-2.0
//
// herl: batch front end. Every subcommand is deterministic given its config
// and seed; diagnostics go to stderr, exit status is 0 only on success.
#include "herl/config.hpp"
#include "herl/dataio.hpp"
#include "herl/pipeline.hpp"
#include "herl/treebed.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace herl;

namespace {

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "flat key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override one config key (key=value), repeatable");
  }
  config::RunConfig load(std::vector<std::string> extra = {}) const {
    std::vector<std::string> all = sets;
    all.insert(all.end(), extra.begin(), extra.end());
    return config::load(file, all);
  }
};

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

int cmd_train(const ConfigArgs& args, const std::string& dataset, const std::string& out) {
  std::vector<std::string> extra;
  if (!dataset.empty()) extra.push_back("dataset=" + dataset);
  if (!out.empty()) extra.push_back("out=" + out);
  const config::RunConfig cfg = args.load(extra);
  const data::Dataset ds = data::read_dataset(cfg.dataset);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  std::ofstream log = open_csv(dir / "train_log.csv");
  log << pipeline::kTrainLogHeader << '\n';
  const pipeline::TrainResult res = pipeline::train(cfg, ds.data, [&](const pipeline::EpochLog& row) {
    log << pipeline::format_log_row(row) << '\n';
    log.flush();
    if (row.epoch % 50 == 0 || row.epoch == cfg.epochs)
      std::cerr << "epoch " << row.epoch << "/" << cfg.epochs << "  loss " << row.total << '\n';
  });
  pipeline::save_checkpoint(dir / "checkpoint", res.state, cfg);
  std::ofstream(dir / "config.txt") << config::render(cfg);
  std::cout << "checkpoint: " << (dir / "checkpoint").string() << "\nlog: " << (dir / "train_log.csv").string()
            << '\n';
  return 0;
}

int cmd_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& dataset, int k,
             const std::string& out) {
  std::vector<std::string> extra;
  if (!dataset.empty()) extra.push_back("dataset=" + dataset);
  if (k > 0) extra.push_back("clusters=" + std::to_string(k));
  const config::RunConfig cfg = args.load(extra);
  const model::ModelState state = pipeline::load_checkpoint(checkpoint);
  const data::Dataset ds = data::read_dataset(cfg.dataset);
  const pipeline::EvalResult r = pipeline::evaluate(state, ds, cfg);

  double missing = 0.0;
  for (Index i = 0; i < ds.data.mask.rows(); ++i) missing += ds.data.mask.row(i).minCoeff() == 0.0 ? 1.0 : 0.0;
  const double eta = ds.data.samples() > 0 ? missing / static_cast<double>(ds.data.samples()) : 0.0;
  const std::string row = pipeline::format_metrics_row(cfg.seed, eta, r);
  std::cout << pipeline::kMetricsHeader << '\n' << row << '\n';
  std::cout << "k = " << r.k << "  ACC " << r.metrics.acc << "  NMI " << r.metrics.nmi << "  ARI " << r.metrics.ari
            << "  inertia " << r.inertia << '\n';
  if (!out.empty()) {
    std::ofstream f = open_csv(out);
    f << pipeline::kMetricsHeader << '\n' << row << '\n';
  }
  return 0;
}

tree::TreeSpec tree_spec(int b, int R, double c, double scale, double tau) {
  tree::TreeSpec spec;
  spec.branching = b;
  spec.depth = R;
  spec.c = c;
  spec.scale = scale;
  spec.tau_step = tau;
  spec.validate();
  return spec;
}

int cmd_sarkar(const tree::TreeSpec& spec, const std::string& out, const std::string& layout) {
  const tree::RegularTree t(spec);
  const tree::TreeEmbedding emb = tree::sarkar_embed(t, spec);
  std::vector<Eigen::Vector2d> pts;
  for (const auto& p : emb.placement) pts.emplace_back(p.coords()(0), p.coords()(1));
  data::write_embedding_csv(pts, t, out);
  std::cout << "wrote " << t.size() << " nodes to " << out << '\n';
  if (!layout.empty()) {
    data::write_embedding_csv(tree::euclidean_analog_layout(t, spec), t, layout);
    std::cout << "wrote flat layout to " << layout << '\n';
  }
  return 0;
}

int cmd_distortion(const tree::TreeSpec& spec, const std::string& embedding, const std::string& metric,
                   const std::vector<std::string>& filters, const std::string& out) {
  const tree::RegularTree t(spec);
  const std::vector<Eigen::Vector2d> pts = data::read_embedding_csv(embedding);
  if (pts.size() != t.size())
    throw ShapeError(embedding + " has " + std::to_string(pts.size()) + " nodes; the tree has " +
                     std::to_string(t.size()));
  tree::TreeEmbedding emb{spec, {}};
  if (metric == "hyperbolic")
    for (const auto& p : pts) emb.placement.emplace_back(Vector(p), spec.c);

  const double bound = tree::euclidean_lower_bound(spec.branching, spec.depth, 2);
  std::ostringstream csv;
  csv << "pair_filter,D,s_star,max_ratio,min_ratio,euclidean_lower_bound\n";
  for (const std::string& name : filters) {
    const tree::PairFilter f = tree::parse_pair_filter(name);
    const tree::DistortionReport r =
        metric == "hyperbolic" ? tree::measure_distortion(emb, t, f) : tree::measure_distortion(pts, t, f);
    csv << tree::to_string(f) << ',' << data::format_double(r.distortion) << ',' << data::format_double(r.s_star)
        << ',' << data::format_double(r.max_ratio) << ',' << data::format_double(r.min_ratio) << ','
        << data::format_double(bound) << '\n';
    std::cerr << tree::to_string(f) << ": D = " << r.distortion << " over " << r.pairs << " pairs\n";
  }
  std::cout << csv.str();
  if (!out.empty()) open_csv(out) << csv.str();
  return 0;
}

int cmd_synth(const ConfigArgs& args, const std::string& out) {
  const config::RunConfig cfg = args.load();
  const data::Dataset ds = pipeline::make_synthetic(cfg);
  data::write_dataset(out, ds);
  std::cout << "wrote " << ds.data.samples() << " samples, " << (ds.labels.empty() ? 0 : ds.labels.back() + 1)
            << " classes to " << out << '\n';
  return 0;
}

int cmd_gradcheck(int points, std::uint64_t seed, double h) {
  std::vector<pipeline::GradCheckRow> rows = pipeline::gradcheck_ops(points, seed, h);
  rows.push_back(pipeline::gradcheck_full_loss(seed, h));
  bool ok = true;
  std::cout << "op,rel_err,tol,status\n";
  for (const auto& r : rows) {
    std::cout << r.name << ',' << data::format_double(r.rel_err) << ',' << data::format_double(r.tol) << ','
              << (r.pass() ? "pass" : "FAIL") << '\n';
    ok = ok && r.pass();
  }
  if (!ok) std::cerr << "gradient check failed\n";
  return ok ? 0 : 1;
}

int cmd_ablate(const ConfigArgs& args, int seeds, const std::string& out) {
  const config::RunConfig cfg = args.load();
  std::vector<std::uint64_t> list;
  for (int s = 0; s < seeds; ++s) list.push_back(cfg.seed + static_cast<std::uint64_t>(s));
  std::ostringstream csv;
  csv << "variant,seed,view1_ari,acc,nmi,ari,inertia\n";
  const auto rows = pipeline::run_ablation(cfg, list, [&](const pipeline::AblationRow& r) {
    std::cerr << "seed " << r.seed << " " << r.variant << ": ARI " << r.result.metrics.ari << '\n';
  });
  std::map<std::string, std::pair<double, int>> means;
  for (const auto& r : rows) {
    csv << r.variant << ',' << r.seed << ',' << data::format_double(r.view1_ari) << ','
        << data::format_double(r.result.metrics.acc) << ',' << data::format_double(r.result.metrics.nmi) << ','
        << data::format_double(r.result.metrics.ari) << ',' << data::format_double(r.result.inertia) << '\n';
    means[r.variant].first += r.result.metrics.ari;
    ++means[r.variant].second;
  }
  std::cout << csv.str();
  for (const auto& v : pipeline::ablation_variants())
    std::cout << "mean ARI " << v.name << ": " << means[v.name].first / means[v.name].second << '\n';
  if (!out.empty()) open_csv(out) << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"herl - hyperbolic incomplete multi-view clustering lab"};
  app.require_subcommand(1);

  ConfigArgs train_args, eval_args, synth_args, ablate_args;
  std::string dataset, out, checkpoint, embedding, layout, metric = "hyperbolic";
  std::vector<std::string> filters{"edges", "siblings", "all"};
  int k = 0, points = 100, seeds = 5;
  std::uint64_t seed = 0;
  int b = 2, R = 3;
  double c = 1.0, scale = 1.0, tau = 0.0, h = 1e-6;

  auto* train = app.add_subcommand("train", "train a model on a dataset directory");
  train_args.attach(train);
  train->add_option("--dataset", dataset, "dataset directory (overrides config)");
  train->add_option("--out", out, "output directory (overrides config)");

  auto* eval = app.add_subcommand("eval", "recover, cluster and score a dataset");
  eval_args.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--dataset", dataset, "dataset directory (overrides config)");
  eval->add_option("--k", k, "number of clusters (default: distinct labels)");
  eval->add_option("--out", out, "also write the metrics CSV here");

  auto add_tree = [&](CLI::App* cmd) {
    cmd->add_option("--b", b, "branching factor")->capture_default_str();
    cmd->add_option("--R", R, "depth")->capture_default_str();
    cmd->add_option("--c", c, "curvature")->capture_default_str();
    cmd->add_option("--scale", scale, "radial step multiplier")->capture_default_str();
    cmd->add_option("--tau", tau, "radial step (0 = ln b)")->capture_default_str();
  };
  auto* sarkar = app.add_subcommand("sarkar", "embed a regular tree in the Poincare disk");
  add_tree(sarkar);
  sarkar->add_option("--out", out, "embedding CSV")->required();
  sarkar->add_option("--layout", layout, "also write the flat analog layout CSV");

  auto* distortion = app.add_subcommand("distortion", "measure the distortion of an embedding CSV");
  add_tree(distortion);
  distortion->add_option("--embedding", embedding, "embedding CSV (node_id,level,x,y)")->required();
  distortion->add_option("--metric", metric, "hyperbolic or euclidean")
      ->check(CLI::IsMember({"hyperbolic", "euclidean"}))
      ->capture_default_str();
  distortion->add_option("--filter", filters, "pair filters: edges, siblings, all");
  distortion->add_option("--out", out, "also write the report CSV here");

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset directory");
  synth_args.attach(synth);
  synth->add_option("--out", out, "dataset directory")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every op and the full loss");
  gradcheck->add_option("--points", points, "random points per op")->capture_default_str();
  gradcheck->add_option("--seed", seed, "seed")->capture_default_str();
  gradcheck->add_option("--step", h, "finite-difference step")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "loss-term ablation on synthetic data over several seeds");
  ablate_args.attach(ablate);
  ablate->add_option("--seeds", seeds, "number of seeds, starting at config seed")->capture_default_str();
  ablate->add_option("--out", out, "also write the per-run CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_args, dataset, out);
    if (*eval) return cmd_eval(eval_args, checkpoint, dataset, k, out);
    if (*sarkar) return cmd_sarkar(tree_spec(b, R, c, scale, tau), out, layout);
    if (*distortion) return cmd_distortion(tree_spec(b, R, c, scale, tau), embedding, metric, filters, out);
    if (*synth) return cmd_synth(synth_args, out);
    if (*gradcheck) return cmd_gradcheck(points, seed, h);
    if (*ablate) return cmd_ablate(ablate_args, seeds, out);
  } catch (const std::exception& e) {
    std::cerr << "herl: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
