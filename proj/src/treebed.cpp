// SPDX-License-Identifier: Apache-2.0
#include "herl/treebed.hpp"

#include "herl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

namespace herl::tree {

double TreeSpec::radial_step() const {
  const double base = tau_step > 0.0 ? tau_step : std::log(static_cast<double>(branching));
  return scale * base;
}

void TreeSpec::validate() const {
  if (branching < 2) throw ConfigError("tree: branching factor must be >= 2");
  if (depth < 1) throw ConfigError("tree: depth must be >= 1");
  if (!(scale > 0.0)) throw ConfigError("tree: scale must be positive");
  if (!(c > 0.0)) throw ConfigError("tree: curvature must be positive");
  if (tau_step < 0.0 || !std::isfinite(tau_step)) throw ConfigError("tree: tau_step must be positive");
}

std::uint64_t node_count(int b, int R) {
  std::uint64_t total = 0;
  std::uint64_t level = 1;
  for (int k = 0; k <= R; ++k) {
    total += level;
    if (total > kMaxTreeNodes) return total;  // caller only needs to know it is too big
    level *= static_cast<std::uint64_t>(b);
  }
  return total;
}

RegularTree::RegularTree(const TreeSpec& spec) : b_(spec.branching), R_(spec.depth) {
  spec.validate();
  const std::uint64_t count = node_count(b_, R_);
  if (count > kMaxTreeNodes)
    throw ConfigError("tree: " + std::to_string(b_) + "-ary tree of depth " + std::to_string(R_) +
                      " exceeds the node limit of " + std::to_string(kMaxTreeNodes));
  nodes_.reserve(count);
  nodes_.push_back({0, 0, 0, 0.0, 2.0 * std::numbers::pi});
  for (std::size_t id = 0; nodes_.size() < count; ++id) {
    const TreeNode parent = nodes_[id];
    const double width = parent.sector_width / b_;
    for (int j = 0; j < b_; ++j) nodes_.push_back({id, parent.level + 1, j, parent.sector_lo + j * width, width});
  }
}

std::size_t RegularTree::leaf_count() const {
  return static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(b_), R_)));
}

std::size_t RegularTree::level_begin(int level) const {
  // (b^level - 1) / (b - 1)
  std::size_t first = 0, width = 1;
  for (int k = 0; k < level; ++k) {
    first += width;
    width *= static_cast<std::size_t>(b_);
  }
  return first;
}

std::size_t RegularTree::child(std::size_t id, int j) const {
  const std::size_t c = id * static_cast<std::size_t>(b_) + 1 + static_cast<std::size_t>(j);
  if (j < 0 || j >= b_ || c >= nodes_.size()) throw ConfigError("tree: child index out of range");
  return c;
}

std::size_t RegularTree::lca(std::size_t u, std::size_t v) const {
  while (nodes_.at(u).level > nodes_.at(v).level) u = nodes_[u].parent;
  while (nodes_.at(v).level > nodes_.at(u).level) v = nodes_[v].parent;
  while (u != v) {
    u = nodes_[u].parent;
    v = nodes_[v].parent;
  }
  return u;
}

int RegularTree::distance(std::size_t u, std::size_t v) const {
  return nodes_.at(u).level + nodes_.at(v).level - 2 * nodes_[lca(u, v)].level;
}

double ball_norm_for_radius(double r, double c) {
  const double sc = std::sqrt(c);
  return std::tanh(sc * r / 2.0) / sc;
}

TreeEmbedding sarkar_embed(const RegularTree& tree, const TreeSpec& spec, double eps) {
  spec.validate();
  const double step = spec.radial_step();
  const double deepest = std::tanh(std::sqrt(spec.c) * tree.depth() * step / 2.0);
  if (deepest > 1.0 - eps)
    throw BoundaryError("sarkar_embed: depth " + std::to_string(tree.depth()) +
                        " puts the deepest level within eps of the disk boundary; reduce depth or scale");
  TreeEmbedding emb{spec, {}};
  emb.placement.reserve(tree.size());
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const TreeNode& n = tree.node(id);
    const double norm = ball_norm_for_radius(n.level * step, spec.c);
    const double theta = n.sector_lo + n.sector_width / 2.0;
    Vector x(2);
    if (n.level == 0)
      x.setZero();
    else
      x << norm * std::cos(theta), norm * std::sin(theta);
    emb.placement.emplace_back(std::move(x), spec.c);
  }
  return emb;
}

std::vector<Eigen::Vector2d> euclidean_analog_layout(const RegularTree& tree, const TreeSpec& spec) {
  spec.validate();
  const double step = spec.radial_step();
  std::vector<Eigen::Vector2d> out;
  out.reserve(tree.size());
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const TreeNode& n = tree.node(id);
    const double r = n.level * step;
    const double theta = n.sector_lo + n.sector_width / 2.0;
    out.emplace_back(n.level == 0 ? Eigen::Vector2d::Zero() : Eigen::Vector2d(r * std::cos(theta), r * std::sin(theta)));
  }
  return out;
}

PairFilter parse_pair_filter(const std::string& name) {
  if (name == "all") return PairFilter::All;
  if (name == "edges") return PairFilter::Edges;
  if (name == "siblings") return PairFilter::Siblings;
  throw ConfigError("unknown pair filter '" + name + "' (expected all, edges or siblings)");
}

std::string to_string(PairFilter filter) {
  switch (filter) {
    case PairFilter::All:
      return "all";
    case PairFilter::Edges:
      return "edges";
    case PairFilter::Siblings:
      return "siblings";
  }
  return "?";
}

namespace {

struct RatioRange {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::size_t pairs = 0;

  void add(double r) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    ++pairs;
  }
  void merge(const RatioRange& o) {
    lo = std::min(lo, o.lo);
    hi = std::max(hi, o.hi);
    pairs += o.pairs;
  }
};

template <class Metric>
DistortionReport distortion_impl(const RegularTree& tree, PairFilter filter, Metric&& metric) {
  const std::size_t n = tree.size();
  RatioRange total;
  std::mutex merge_mutex;
  if (filter == PairFilter::All) {
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      RatioRange local;
      for (std::size_t u = begin; u < end; ++u)
        for (std::size_t v = u + 1; v < n; ++v) local.add(metric(u, v) / tree.distance(u, v));
      std::lock_guard lock(merge_mutex);
      total.merge(local);
    });
  } else if (filter == PairFilter::Edges) {
    for (std::size_t v = 1; v < n; ++v) total.add(metric(tree.node(v).parent, v));
  } else {
    for (std::size_t p = 0; p < n; ++p) {
      if (tree.node(p).level == tree.depth()) continue;
      for (int i = 0; i < tree.branching(); ++i)
        for (int j = i + 1; j < tree.branching(); ++j) total.add(metric(tree.child(p, i), tree.child(p, j)) / 2.0);
    }
  }
  if (total.pairs == 0) throw ConfigError("measure_distortion: pair filter selected no pairs");
  return {total.hi / total.lo, total.lo, total.hi, total.lo, total.pairs};
}

}  // namespace

DistortionReport measure_distortion(const TreeEmbedding& emb, const RegularTree& tree, PairFilter filter) {
  if (emb.placement.size() != tree.size()) throw ShapeError("measure_distortion: embedding does not cover the tree");
  return distortion_impl(tree, filter,
                         [&](std::size_t u, std::size_t v) { return hyp::hyp_distance(emb.placement[u], emb.placement[v]); });
}

DistortionReport measure_distortion(const std::vector<Eigen::Vector2d>& layout, const RegularTree& tree,
                                    PairFilter filter) {
  if (layout.size() != tree.size()) throw ShapeError("measure_distortion: layout does not cover the tree");
  return distortion_impl(tree, filter, [&](std::size_t u, std::size_t v) { return (layout[u] - layout[v]).norm(); });
}

double adjacent_sibling_distance(const TreeEmbedding& emb, const RegularTree& tree, int level) {
  if (level < 1 || level > tree.depth()) throw ConfigError("adjacent_sibling_distance: level out of range");
  const std::size_t parent = tree.level_begin(level - 1);
  return hyp::hyp_distance(emb.placement.at(tree.child(parent, 0)), emb.placement.at(tree.child(parent, 1)));
}

double adjacent_sibling_distance(const std::vector<Eigen::Vector2d>& layout, const RegularTree& tree, int level) {
  if (level < 1 || level > tree.depth()) throw ConfigError("adjacent_sibling_distance: level out of range");
  const std::size_t parent = tree.level_begin(level - 1);
  return (layout.at(tree.child(parent, 0)) - layout.at(tree.child(parent, 1))).norm();
}

double euclidean_lower_bound(int b, int R, int n) {
  if (b < 2 || R < 1 || n < 1) throw ConfigError("euclidean_lower_bound: need b >= 2, R >= 1, n >= 1");
  const double direct = std::pow(static_cast<double>(b), static_cast<double>(R) / n);
  if (std::isfinite(direct)) return direct / R;
  const double log_value = static_cast<double>(R) / n * std::log(static_cast<double>(b)) - std::log(static_cast<double>(R));
  if (log_value >= std::log(std::numeric_limits<double>::max()))
    throw NumericError("euclidean_lower_bound: result exceeds the double range");
  return std::exp(log_value);
}

}  // namespace herl::tree
