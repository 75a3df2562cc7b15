// SPDX-License-Identifier: Apache-2.0
#include "herl/dataio.hpp"

#include "herl/rng.hpp"

#include <Eigen/SVD>

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace herl::data {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  tree.validate();
  if (samples_per_class < 1) throw ConfigError("synth: samples_per_class must be >= 1");
  if (dim1 < 1 || dim2 < 1) throw ConfigError("synth: feature dimensions must be >= 1");
  if (!(center_step >= 0.0) || !(noise >= 0.0)) throw ConfigError("synth: center_step and noise must be >= 0");
  if (!(cross_view >= 1.0) || !std::isfinite(cross_view)) throw ConfigError("synth: cross_view condition bound must be >= 1");
}

namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n01;
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

}  // namespace

SynthData synth_tree_data(const SynthSpec& spec) {
  spec.validate();
  const tree::RegularTree t(spec.tree);
  // independent streams for centres, the cross-view map and each view's noise
  Rng center_rng(derive_seed(spec.seed, 0));
  Rng map_rng(derive_seed(spec.seed, 1));
  Rng noise1_rng(derive_seed(spec.seed, 2));
  Rng noise2_rng(derive_seed(spec.seed, 3));

  Matrix node_centers = Matrix::Zero(static_cast<Index>(t.size()), spec.dim1);
  for (std::size_t id = 1; id < t.size(); ++id)
    node_centers.row(static_cast<Index>(id)) =
        node_centers.row(static_cast<Index>(t.node(id).parent)) + spec.center_step * gaussian(1, spec.dim1, center_rng);

  const Index classes = static_cast<Index>(t.leaf_count());
  SynthData out;
  out.centers = node_centers.bottomRows(classes);

  // A = U diag(s) V^T with s spread evenly over [1/kappa, 1]: full rank with
  // condition number exactly cross_view.
  const Matrix raw = gaussian(spec.dim2, spec.dim1, map_rng);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(raw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index r = std::min(spec.dim1, spec.dim2);
  Vector s(r);
  for (Index i = 0; i < r; ++i)
    s(i) = r == 1 ? 1.0 : 1.0 - (1.0 - 1.0 / spec.cross_view) * static_cast<double>(i) / static_cast<double>(r - 1);
  out.cross_map = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();

  const Index n = classes * spec.samples_per_class;
  Matrix x1(n, spec.dim1);
  out.labels.reserve(static_cast<std::size_t>(n));
  for (Index k = 0; k < classes; ++k)
    for (int j = 0; j < spec.samples_per_class; ++j) {
      const Index row = k * spec.samples_per_class + j;
      x1.row(row) = out.centers.row(k) + spec.noise * gaussian(1, spec.dim1, noise1_rng);
      out.labels.push_back(static_cast<int>(k));
    }
  Matrix x2 = x1 * out.cross_map.transpose() + spec.noise * gaussian(n, spec.dim2, noise2_rng);
  out.views = {std::move(x1), std::move(x2)};
  return out;
}

void MaskSpec::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("mask: eta must lie in [0, 1]");
  if (views != 2) throw UnsupportedError("mask: only two views are supported, got " + std::to_string(views));
}

Matrix gen_mask(const MaskSpec& spec, Index n) {
  spec.validate();
  if (n < 0) throw ConfigError("mask: negative sample count");
  Matrix mask = Matrix::Ones(n, spec.views);
  const auto missing = static_cast<Index>(std::llround(spec.eta * static_cast<double>(n)));
  Rng rng(spec.seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  // partial Fisher-Yates: the first `missing` slots are a uniform sample
  for (Index i = 0; i < missing; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    mask(order[static_cast<std::size_t>(i)], static_cast<Index>(rng.below(2))) = 0.0;
  }
  return mask;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& raw, const fs::path& path, std::size_t line_no) {
  const std::string cell = trim(raw);
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != end)
    throw IoError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
  return v;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_matrix_csv(const Matrix& m, const fs::path& path) {
  std::ofstream out = open_out(path);
  for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << 'c' << j;
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw IoError(path.string() + ": empty file, expected a header row");
  const std::size_t width = split_csv(trim(line)).size();
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(trim(line));
    if (cells.size() != width)
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                    " cells, found " + std::to_string(cells.size()));
    for (const auto& c : cells) values.push_back(parse_cell(c, path, line_no));
    ++rows;
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(width));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

void write_labels_csv(const std::vector<int>& labels, const fs::path& path) {
  Matrix m(static_cast<Index>(labels.size()), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<Index>(i), 0) = labels[i];
  write_matrix_csv(m, path);
}

std::vector<int> read_labels_csv(const fs::path& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != 1) throw IoError(path.string() + ": labels file must have exactly one column");
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, 0);
    if (v != std::floor(v) || std::abs(v) > 2e9) throw IoError(path.string() + ": non-integer label");
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  ds.data.validate();
  if (ds.data.views.size() != 2) throw UnsupportedError("write_dataset: two views expected");
  if (static_cast<Index>(ds.labels.size()) != ds.data.samples())
    throw ShapeError("write_dataset: label count does not match sample count");
  fs::create_directories(dir);
  for (std::size_t v = 0; v < 2; ++v) {
    Matrix x = ds.data.views[v];
    for (Index i = 0; i < x.rows(); ++i)
      if (ds.data.mask(i, static_cast<Index>(v)) == 0.0) x.row(i).setZero();
    write_matrix_csv(x, dir / ("view" + std::to_string(v + 1) + ".csv"));
  }
  write_labels_csv(ds.labels, dir / "labels.csv");
  write_matrix_csv(ds.data.mask, dir / "mask.csv");
}

Dataset read_dataset(const fs::path& dir) {
  for (const char* name : {"view1.csv", "view2.csv", "labels.csv", "mask.csv"})
    if (!fs::exists(dir / name)) throw IoError("dataset " + dir.string() + " lacks " + name);
  Dataset ds;
  ds.data.views = {read_matrix_csv(dir / "view1.csv"), read_matrix_csv(dir / "view2.csv")};
  ds.data.mask = read_matrix_csv(dir / "mask.csv");
  ds.labels = read_labels_csv(dir / "labels.csv");
  ds.data.validate();
  if (static_cast<Index>(ds.labels.size()) != ds.data.samples())
    throw ShapeError("dataset " + dir.string() + ": " + std::to_string(ds.labels.size()) + " labels for " +
                     std::to_string(ds.data.samples()) + " samples");
  return ds;
}

void write_embedding_csv(const std::vector<Eigen::Vector2d>& points, const tree::RegularTree& tree,
                         const fs::path& path) {
  if (points.size() != tree.size()) throw ShapeError("write_embedding_csv: one point per node expected");
  std::ofstream out = open_out(path);
  out << "node_id,level,x,y\n";
  for (std::size_t id = 0; id < points.size(); ++id)
    out << id << ',' << tree.node(id).level << ',' << format_double(points[id].x()) << ','
        << format_double(points[id].y()) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Eigen::Vector2d> read_embedding_csv(const fs::path& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != 4) throw IoError(path.string() + ": expected columns node_id,level,x,y");
  std::vector<Eigen::Vector2d> points(static_cast<std::size_t>(m.rows()));
  std::vector<char> seen(points.size(), 0);
  for (Index i = 0; i < m.rows(); ++i) {
    const double id = m(i, 0);
    if (id != std::floor(id) || id < 0 || id >= static_cast<double>(points.size()))
      throw IoError(path.string() + ": node_id out of range");
    const auto k = static_cast<std::size_t>(id);
    if (seen[k]) throw IoError(path.string() + ": duplicate node_id " + std::to_string(k));
    seen[k] = 1;
    points[k] = {m(i, 2), m(i, 3)};
  }
  return points;
}

}  // namespace herl::data
