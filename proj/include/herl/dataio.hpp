// SPDX-License-Identifier: Apache-2.0
//
// Synthetic hierarchical two-view data, missing-view masks and CSV I/O.
//
// Random streams: every generator here is xoshiro256** seeded through
// splitmix64 (see rng.hpp); Gaussians come from std::normal_distribution on
// top of it, so streams are bit-reproducible within one standard library.
#pragma once

#include "herl/common.hpp"
#include "herl/impute.hpp"
#include "herl/treebed.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace herl::data {

struct SynthSpec {
  tree::TreeSpec tree{2, 3};
  int samples_per_class = 50;
  Index dim1 = 20;
  Index dim2 = 20;
  double center_step = 1.0;  ///< std of the per-edge Gaussian step of class centres
  double noise = 0.5;        ///< std of per-sample noise (both views)
  double cross_view = 4.0;   ///< condition number of the view-2 map, >= 1
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  std::vector<Matrix> views;  ///< view 1 (N x dim1), view 2 (N x dim2)
  std::vector<int> labels;    ///< leaf index in [0, b^R), class-major order
  Matrix centers;             ///< leaf centres in view-1 space
  Matrix cross_map;           ///< A, dim2 x dim1
};

/// Class centres by a root-to-leaf Gaussian walk; view 1 = centre + noise,
/// view 2 = A * view1 + independent noise.
SynthData synth_tree_data(const SynthSpec& spec);

struct MaskSpec {
  double eta = 0.0;  ///< missing rate in [0, 1]
  int views = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// round(eta N) rows drawn without replacement each lose one uniformly chosen
/// view. Throws UnsupportedError unless views == 2.
Matrix gen_mask(const MaskSpec& spec, Index n);

/// Writes a header `c0,c1,...` then one row per line, 17 significant digits.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
/// Inverse of write_matrix_csv. Throws IoError for a missing/unreadable file,
/// an empty file, ragged rows or non-numeric cells.
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Single-column integer CSV.
void write_labels_csv(const std::vector<int>& labels, const std::filesystem::path& path);
std::vector<int> read_labels_csv(const std::filesystem::path& path);

struct Dataset {
  impute::MaskedDataset data;
  std::vector<int> labels;
};

/// view1.csv, view2.csv, labels.csv, mask.csv. Missing view rows are written
/// as zeros.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
/// Throws IoError when any of the four files is absent.
Dataset read_dataset(const std::filesystem::path& dir);

/// Embedding CSV with header `node_id,level,x,y` (2-D layouts).
void write_embedding_csv(const std::vector<Eigen::Vector2d>& points, const tree::RegularTree& tree,
                         const std::filesystem::path& path);
std::vector<Eigen::Vector2d> read_embedding_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form (17 significant digits).
std::string format_double(double x);

}  // namespace herl::data
