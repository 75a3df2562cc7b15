// SPDX-License-Identifier: Apache-2.0
//
// Regular b-ary trees and their layouts in the Poincare disk and the flat
// plane, plus the distortion measurements that contrast the two.
#pragma once

#include "herl/common.hpp"
#include "herl/hypmath.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace herl::tree {

inline constexpr std::size_t kMaxTreeNodes = 1'000'000;

struct TreeSpec {
  int branching = 2;      ///< b >= 2
  int depth = 1;          ///< R >= 1
  double tau_step = 0.0;  ///< radial step; <= 0 means ln(b)
  double scale = 1.0;     ///< multiplier s on the radial step
  double c = 1.0;         ///< curvature of the embedding disk

  /// Radial step actually used: scale * (tau_step or ln b).
  double radial_step() const;
  void validate() const;
};

struct TreeNode {
  std::size_t parent;  ///< == id for the root
  int level;
  int child_index;     ///< position among siblings, 0 for the root
  double sector_lo;    ///< angular sector [lo, lo + width)
  double sector_width;
};

/// Complete b-ary tree in breadth-first order; node 0 is the root.
class RegularTree {
 public:
  explicit RegularTree(const TreeSpec& spec);

  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const;
  int branching() const { return b_; }
  int depth() const { return R_; }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  /// First node id at the given level.
  std::size_t level_begin(int level) const;
  /// Child `j` of node `id`.
  std::size_t child(std::size_t id, int j) const;

  std::size_t lca(std::size_t u, std::size_t v) const;
  /// Shortest-path distance: level(u) + level(v) - 2 level(lca).
  int distance(std::size_t u, std::size_t v) const;

 private:
  int b_;
  int R_;
  std::vector<TreeNode> nodes_;
};

/// Closed form (b^(R+1) - 1) / (b - 1).
std::uint64_t node_count(int b, int R);

struct TreeEmbedding {
  TreeSpec spec;
  std::vector<hyp::BallPoint> placement;
};

/// Recursive radial placement: root at the origin, level k at hyperbolic radius
/// k * radial_step, each node centred in its share of the parent's sector.
/// Throws BoundaryError when the deepest level would sit within eps of the
/// disk boundary.
TreeEmbedding sarkar_embed(const RegularTree& tree, const TreeSpec& spec, double eps = hyp::kDefaultEps);

/// Ball norm of a point at hyperbolic distance r from the origin.
double ball_norm_for_radius(double r, double c);

/// Same angular schedule, flat radius k * radial_step.
std::vector<Eigen::Vector2d> euclidean_analog_layout(const RegularTree& tree, const TreeSpec& spec);

enum class PairFilter { All, Edges, Siblings };

PairFilter parse_pair_filter(const std::string& name);
std::string to_string(PairFilter filter);

struct DistortionReport {
  double distortion;  ///< max_ratio / min_ratio
  double s_star;      ///< == min_ratio
  double max_ratio;
  double min_ratio;
  std::size_t pairs;
};

/// Ratios d_M(f(u), f(v)) / d_T(u, v) over the selected pairs. Pair enumeration
/// is split across worker threads. Throws ConfigError when no pair is selected.
DistortionReport measure_distortion(const TreeEmbedding& emb, const RegularTree& tree, PairFilter filter);
DistortionReport measure_distortion(const std::vector<Eigen::Vector2d>& layout, const RegularTree& tree,
                                    PairFilter filter);

/// Distance between children 0 and 1 of the first node at level - 1.
double adjacent_sibling_distance(const TreeEmbedding& emb, const RegularTree& tree, int level);
double adjacent_sibling_distance(const std::vector<Eigen::Vector2d>& layout, const RegularTree& tree, int level);

/// b^(R/n) / R, evaluated in log space when the direct power would overflow.
double euclidean_lower_bound(int b, int R, int n);

}  // namespace herl::tree
