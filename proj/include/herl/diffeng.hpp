// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over dense double matrices. A Tape
// records every operation in execution order; backward() replays it in exact
// reverse. Vars are cheap handles into a tape and are only valid while the
// tape is alive.
//
// Subgradient conventions: relu'(0) = 0; clip at exactly |z| = cr takes the
// unclipped branch; a capped artanh argument has zero derivative.
#pragma once

#include "herl/common.hpp"
#include "herl/hypmath.hpp"

#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace herl::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Accumulated gradient after Tape::backward; a zero matrix when the
  /// variable received none.
  Matrix grad() const;
  double scalar() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const;
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf variable. Parameters use requires_grad = true.
  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Appends an op node. The node requires grad iff any input does; the
  /// backward function is dropped otherwise. Throws NumericError when the
  /// forward value is not finite.
  Var record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);

  /// Adds g into v's gradient slot (no-op for variables without grad).
  void accumulate(const Var& v, const Matrix& g);

  /// Clears all gradient slots, seeds d loss = 1 and runs the tape in reverse.
  /// Throws ShapeError for a non-scalar loss and ConfigError when the loss does
  /// not depend on any variable that requires grad.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    const char* op = "leaf";
    BackwardFn backward;
  };

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  void check_owner(const Var& v) const;

  std::vector<Node> nodes_;
};

// Elementwise and structural ops. Operands must live on the same tape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a (N x M) plus a row vector (1 x M) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// x W + b with x: N x in, W: in x out, b: 1 x out.
Var affine(const Var& x, const Var& W, const Var& b);
Var relu(const Var& x);
Var tanh_act(const Var& x);
Var exp_act(const Var& x);
Var l2_normalize_rows(const Var& x);
/// log softmax along each row, computed through log-sum-exp.
Var row_logsoftmax(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);
/// sum_ij w_ij x_ij with a constant weight matrix.
Var weighted_sum(const Var& x, const Matrix& weights);
/// Same value, no gradient path.
Var detach(const Var& x);

// Row-wise hyperbolic ops; forward values come from the hypmath kernels.
Var clip_rows(const Var& x, const hyp::HypConfig& cfg);
Var exp_map_rows(const Var& x, const hyp::HypConfig& cfg);
Var hyp_project_rows(const Var& x, const hyp::HypConfig& cfg);
Var mobius_add_rows(const Var& x, const Var& y, double c);
/// N x 1 distances between matching rows.
Var hyp_distance_rows(const Var& a, const Var& b, double c, double eps = hyp::kDefaultEps);
/// N x M matrix of distances between every row of a and every row of b.
Var hyp_distance_pairwise(const Var& a, const Var& b, double c, double eps = hyp::kDefaultEps);
/// N x M cosine similarities between rows.
Var cosine_pairwise(const Var& a, const Var& b);

/// A scalar-valued program over one or more leaf inputs.
using Program = std::function<Var(Tape&, std::span<const Var>)>;

/// Worst coordinate-wise relative error between the tape gradient and central
/// differences (f(x+h) - f(x-h)) / 2h, with denominator
/// max(|analytic|, |numeric|, 1e-8). Throws NumericError when an evaluation is
/// not finite.
double grad_check(const Program& f, std::span<const Matrix> points, double h = 1e-6);
double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Matrix& point, double h = 1e-6);

}  // namespace herl::ad
