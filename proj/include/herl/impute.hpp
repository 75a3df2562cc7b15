// SPDX-License-Identifier: Apache-2.0
//
// Missing-view recovery: observed rows keep their teacher features, missing
// rows are translated from the other view through the projection head g.
#pragma once

#include "herl/common.hpp"
#include "herl/netmodel.hpp"

#include <vector>

namespace herl::impute {

struct MaskedDataset {
  std::vector<Matrix> views;  ///< N x d_v each; rows of missing views are ignored
  Matrix mask;                ///< N x V, entries in {0, 1}

  Index samples() const { return mask.rows(); }
  /// Throws ConfigError unless shapes agree, entries are binary and every
  /// sample observes at least one view.
  void validate() const;
  /// Row indices with every view observed.
  std::vector<Index> complete_rows() const;
};

/// Completed per-view representations for all N samples (two views only).
/// Throws UnsupportedError for V != 2.
std::vector<Matrix> recover(const model::ModelState& state, const MaskedDataset& data);

/// Column-wise concatenation in view order. Throws ShapeError on row mismatch.
Matrix assemble(const std::vector<Matrix>& blocks);

}  // namespace herl::impute
