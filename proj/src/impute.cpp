// SPDX-License-Identifier: Apache-2.0
#include "herl/impute.hpp"

namespace herl::impute {

void MaskedDataset::validate() const {
  if (views.empty()) throw ConfigError("dataset: no views");
  if (mask.cols() != static_cast<Index>(views.size()))
    throw ConfigError("dataset: mask has " + std::to_string(mask.cols()) + " columns for " + std::to_string(views.size()) +
                      " views");
  for (const Matrix& x : views)
    if (x.rows() != mask.rows()) throw ConfigError("dataset: view row count differs from mask row count");
  for (Index i = 0; i < mask.rows(); ++i) {
    double observed = 0.0;
    for (Index v = 0; v < mask.cols(); ++v) {
      const double m = mask(i, v);
      if (m != 0.0 && m != 1.0) throw ConfigError("dataset: mask entries must be 0 or 1");
      observed += m;
    }
    if (observed == 0.0) throw ConfigError("dataset: sample " + std::to_string(i) + " has no observed view");
  }
}

std::vector<Index> MaskedDataset::complete_rows() const {
  std::vector<Index> rows;
  for (Index i = 0; i < mask.rows(); ++i)
    if ((mask.row(i).array() == 1.0).all()) rows.push_back(i);
  return rows;
}

std::vector<Matrix> recover(const model::ModelState& state, const MaskedDataset& data) {
  data.validate();
  if (data.views.size() != 2)
    throw UnsupportedError("recover: only two-view completion is supported, got " + std::to_string(data.views.size()));
  std::vector<Matrix> teacher;
  for (Index v = 0; v < 2; ++v) teacher.push_back(model::teacher_features(state, v, data.views[static_cast<std::size_t>(v)]));
  std::vector<Matrix> completed;
  for (Index v = 0; v < 2; ++v) {
    const Index u = 1 - v;
    const Matrix translated = model::apply_projector(state, teacher[static_cast<std::size_t>(u)]);
    Matrix out = teacher[static_cast<std::size_t>(v)];
    for (Index i = 0; i < out.rows(); ++i)
      if (data.mask(i, v) == 0.0) out.row(i) = translated.row(i);
    completed.push_back(std::move(out));
  }
  return completed;
}

Matrix assemble(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) throw ShapeError("assemble: no blocks");
  Index cols = 0;
  for (const Matrix& b : blocks) {
    if (b.rows() != blocks.front().rows()) throw ShapeError("assemble: blocks disagree on row count");
    cols += b.cols();
  }
  Matrix out(blocks.front().rows(), cols);
  Index offset = 0;
  for (const Matrix& b : blocks) {
    out.middleCols(offset, b.cols()) = b;
    offset += b.cols();
  }
  return out;
}

}  // namespace herl::impute
