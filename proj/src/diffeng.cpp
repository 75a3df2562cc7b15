// SPDX-License-Identifier: Apache-2.0
#include "herl/diffeng.hpp"

#include <algorithm>
#include <cmath>

namespace herl::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
}

std::span<const double> row_span(const Matrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

/// Gradient of w = x (+)_c y given dL/dw; accumulates into gx and gy.
void mobius_backward(std::span<const double> x, std::span<const double> y, double c, std::span<const double> gw,
                     std::span<double> gx, std::span<double> gy) {
  const std::size_t n = x.size();
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    xx += x[k] * x[k];
    yy += y[k] * y[k];
    xy += x[k] * y[k];
  }
  const auto t = hyp::kernel::mobius_terms(xx, yy, xy, c);
  double gw_dot_w = 0.0, alpha_bar = 0.0, beta_bar = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = (t.alpha * x[k] + t.beta * y[k]) / t.den;
    const double num_bar = gw[k] / t.den;
    gw_dot_w += gw[k] * w;
    alpha_bar += num_bar * x[k];
    beta_bar += num_bar * y[k];
  }
  const double den_bar = -gw_dot_w / t.den;
  const double xy_bar = 2.0 * c * alpha_bar + 2.0 * c * den_bar;
  const double yy_bar = c * alpha_bar + c * c * xx * den_bar;
  const double xx_bar = -c * beta_bar + c * c * yy * den_bar;
  for (std::size_t k = 0; k < n; ++k) {
    const double num_bar = gw[k] / t.den;
    gx[k] += t.alpha * num_bar + 2.0 * xx_bar * x[k] + xy_bar * y[k];
    gy[k] += t.beta * num_bar + 2.0 * yy_bar * y[k] + xy_bar * x[k];
  }
}

/// Accumulates g * dD(a, b)/da and g * dD(a, b)/db.
void distance_backward(std::span<const double> a, std::span<const double> b, double c, double eps, double g,
                       std::span<double> ga, std::span<double> gb) {
  // D = (2/sqrt c) artanh(sqrt(c q / den)), q = |a - b|^2,
  // den = 1 - 2c<a,b> + c^2|a|^2|b|^2, and den - c q = (1 - c|a|^2)(1 - c|b|^2).
  const std::size_t n = a.size();
  double aa = 0.0, bb = 0.0, ab = 0.0, q = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    aa += a[k] * a[k];
    bb += b[k] * b[k];
    ab += a[k] * b[k];
    const double d = a[k] - b[k];
    q += d * d;
  }
  const double den = 1.0 - 2.0 * c * ab + c * c * (aa * bb);
  const double w = std::sqrt(q / den);
  if (w < hyp::kZeroNorm || std::sqrt(c) * w >= 1.0 - eps) return;
  const double coef = g * 2.0 / ((1.0 - c * aa) * (1.0 - c * bb) * w * den);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a[k] - b[k];
    ga[k] += coef * (d * den + q * c * (b[k] - c * bb * a[k]));
    gb[k] += coef * (-d * den + q * c * (a[k] - c * aa * b[k]));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / Tape

const Matrix& Var::value() const { return tape_->node(id_).value; }

Matrix Var::grad() const {
  const auto& n = tape_->node(id_);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("Var::scalar on a " + shape_str(v.rows(), v.cols()) + " value");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Tape& Var::tape() const { return *tape_; }

void Tape::check_owner(const Var& v) const {
  if (v.tape_ != this) throw ShapeError("variable belongs to a different tape");
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  if (!value.allFinite()) throw NumericError("leaf: non-finite value");
  nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, "leaf", nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  if (!value.allFinite()) throw NumericError(std::string(op) + ": non-finite value in forward pass");
  bool needs = false;
  for (const Var& in : inputs) {
    check_owner(in);
    needs = needs || node(in.id_).requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, op, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_.at(v.id_);
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
    throw ShapeError(std::string("accumulate: gradient shape mismatch at ") + n.op);
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(const Var& loss) {
  check_owner(loss);
  const Node& root = node(loss.id_);
  if (root.value.size() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!root.requires_grad) throw ConfigError("backward: loss does not depend on any differentiable variable");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // The closure may accumulate into earlier nodes only; copy the gradient so
    // the reference stays valid.
    const Matrix g = n.grad;
    n.backward(*this, g);
  }
}

// ---------------------------------------------------------------------------
// Elementwise / structural

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return a.tape().record("add", a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return a.tape().record("sub", a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return a.tape().record("mul", a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double s) {
  return a.tape().record("scale", a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: bias must be 1x" + std::to_string(a.cols()));
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape().record("add_row", std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " times " + shape_str(b.rows(), b.cols()));
  return a.tape().record("matmul", a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(const Var& a) {
  return a.tape().record("transpose", a.value().transpose(), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var affine(const Var& x, const Var& W, const Var& b) {
  if (x.cols() != W.rows()) throw ShapeError("affine: input width " + std::to_string(x.cols()) + " vs weight rows " +
                                             std::to_string(W.rows()));
  if (b.rows() != 1 || b.cols() != W.cols()) throw ShapeError("affine: bias must be 1x" + std::to_string(W.cols()));
  Matrix out = x.value() * W.value();
  out.rowwise() += b.value().row(0);
  return x.tape().record("affine", std::move(out), {x, W, b}, [x, W, b](Tape& t, const Matrix& g) {
    if (x.requires_grad()) t.accumulate(x, g * W.value().transpose());
    if (W.requires_grad()) t.accumulate(W, x.value().transpose() * g);
    t.accumulate(b, g.colwise().sum());
  });
}

Var relu(const Var& x) {
  return x.tape().record("relu", x.value().cwiseMax(0.0), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, (x.value().array() > 0.0).select(g, 0.0));
  });
}

Var tanh_act(const Var& x) {
  Matrix y = x.value().array().tanh().matrix();
  return x.tape().record("tanh", y, {x}, [x, y](Tape& t, const Matrix& g) {
    t.accumulate(x, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var exp_act(const Var& x) {
  Matrix y = x.value().array().exp().matrix();
  return x.tape().record("exp", y, {x}, [x, y](Tape& t, const Matrix& g) { t.accumulate(x, g.cwiseProduct(y)); });
}

Var l2_normalize_rows(const Var& x) {
  const Matrix& v = x.value();
  Vector norms = v.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i)
    if (norms(i) == 0.0) throw DomainError("l2_normalize_rows: zero row " + std::to_string(i));
  Matrix y = norms.cwiseInverse().asDiagonal() * v;
  return x.tape().record("l2_normalize_rows", y, {x}, [x, y, norms](Tape& t, const Matrix& g) {
    // d(z/|z|) = (I - y y^T) dz / |z|
    Vector radial = (g.cwiseProduct(y)).rowwise().sum();
    Matrix gx = g - radial.asDiagonal() * y;
    t.accumulate(x, norms.cwiseInverse().asDiagonal() * gx);
  });
}

Var row_logsoftmax(const Var& x) {
  const Matrix& v = x.value();
  Vector row_max = v.rowwise().maxCoeff();
  Matrix shifted = v.colwise() - row_max;
  Vector lse = shifted.array().exp().rowwise().sum().log().matrix() + row_max;
  Matrix y = v.colwise() - lse;
  return x.tape().record("row_logsoftmax", y, {x}, [x, y](Tape& t, const Matrix& g) {
    Matrix p = y.array().exp().matrix();
    Vector gsum = g.rowwise().sum();
    t.accumulate(x, g - gsum.asDiagonal() * p);
  });
}

Var sum(const Var& x) {
  return x.tape().record("sum", scalar_matrix(x.value().sum()), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor");
  return x.tape().record("mean", scalar_matrix(x.value().sum() / n), {x}, [x, n](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Var weighted_sum(const Var& x, const Matrix& weights) {
  if (weights.rows() != x.rows() || weights.cols() != x.cols())
    throw ShapeError("weighted_sum: weights " + shape_str(weights.rows(), weights.cols()) + " vs value " +
                     shape_str(x.rows(), x.cols()));
  return x.tape().record("weighted_sum", scalar_matrix(x.value().cwiseProduct(weights).sum()), {x},
                         [x, weights](Tape& t, const Matrix& g) { t.accumulate(x, weights * g(0, 0)); });
}

Var detach(const Var& x) { return x.tape().constant(x.value()); }

// ---------------------------------------------------------------------------
// Hyperbolic

Var clip_rows(const Var& x, const hyp::HypConfig& cfg) {
  cfg.validate();
  const Matrix& v = x.value();
  Vector norms = v.rowwise().norm();
  Matrix y(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) y.row(i) = hyp::kernel::clip_scale(norms(i), cfg.cr) * v.row(i);
  const double cr = cfg.cr;
  return x.tape().record("clip_rows", std::move(y), {x}, [x, norms, cr](Tape& t, const Matrix& g) {
    const Matrix& z = x.value();
    Matrix gx = g;
    for (Index i = 0; i < z.rows(); ++i) {
      const double n = norms(i);
      if (n < hyp::kZeroNorm || n <= cr) continue;
      // d(cr z/|z|) = (cr/|z|)(I - z z^T/|z|^2) dz
      const double radial = z.row(i).dot(g.row(i)) / (n * n);
      gx.row(i) = (cr / n) * (g.row(i) - radial * z.row(i));
    }
    t.accumulate(x, gx);
  });
}

Var exp_map_rows(const Var& x, const hyp::HypConfig& cfg) {
  cfg.validate();
  const Matrix& v = x.value();
  Vector norms = v.rowwise().norm();
  Matrix y(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) y.row(i) = hyp::kernel::exp_map_scale(norms(i), cfg.c, cfg.eps) * v.row(i);
  const double c = cfg.c, eps = cfg.eps;
  return x.tape().record("exp_map_rows", std::move(y), {x}, [x, norms, c, eps](Tape& t, const Matrix& g) {
    const Matrix& z = x.value();
    const double k = std::sqrt(c);
    Matrix gx(z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i) {
      const double n = norms(i);
      if (n < hyp::kZeroNorm) {
        gx.row(i) = g.row(i);
        continue;
      }
      // out = f(n) z with f(n) = tanh(kn)/(kn); dout = f dz + (f'(n)/n) (z.dz) z
      const double kn = k * n;
      const double th = std::tanh(kn);
      double f, fprime_over_n;
      if (th > 1.0 - eps) {
        f = (1.0 - eps) / kn;
        fprime_over_n = -f / (n * n);
      } else {
        f = th / kn;
        if (kn < 1e-3) {
          fprime_over_n = k * k * (-2.0 / 3.0 + 8.0 / 15.0 * kn * kn);
        } else {
          const double sech2 = 1.0 - th * th;
          fprime_over_n = (kn * sech2 - th) / (k * n * n * n);
        }
      }
      gx.row(i) = f * g.row(i) + (fprime_over_n * z.row(i).dot(g.row(i))) * z.row(i);
    }
    t.accumulate(x, gx);
  });
}

Var hyp_project_rows(const Var& x, const hyp::HypConfig& cfg) { return exp_map_rows(clip_rows(x, cfg), cfg); }

Var mobius_add_rows(const Var& x, const Var& y, double c) {
  require_same_shape(x, y, "mobius_add_rows");
  if (!(c > 0.0)) throw ConfigError("mobius_add_rows: curvature must be positive");
  const Matrix& a = x.value();
  const Matrix& b = y.value();
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    hyp::kernel::mobius_add(row_span(a, i), row_span(b, i), {out.data() + i * out.cols(), static_cast<std::size_t>(out.cols())},
                            c);
  return x.tape().record("mobius_add_rows", std::move(out), {x, y}, [x, y, c](Tape& t, const Matrix& g) {
    const Matrix& a = x.value();
    const Matrix& b = y.value();
    Matrix gx = Matrix::Zero(a.rows(), a.cols());
    Matrix gy = Matrix::Zero(b.rows(), b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
      const std::size_t n = static_cast<std::size_t>(a.cols());
      mobius_backward(row_span(a, i), row_span(b, i), c, row_span(g, i), {gx.data() + i * n, n}, {gy.data() + i * n, n});
    }
    t.accumulate(x, gx);
    t.accumulate(y, gy);
  });
}

Var hyp_distance_rows(const Var& a, const Var& b, double c, double eps) {
  require_same_shape(a, b, "hyp_distance_rows");
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  Matrix out(va.rows(), 1);
  for (Index i = 0; i < va.rows(); ++i) out(i, 0) = hyp::kernel::distance(row_span(va, i), row_span(vb, i), c, eps);
  return a.tape().record("hyp_distance_rows", std::move(out), {a, b}, [a, b, c, eps](Tape& t, const Matrix& g) {
    const Matrix& va = a.value();
    const Matrix& vb = b.value();
    const std::size_t n = static_cast<std::size_t>(va.cols());
    Matrix ga = Matrix::Zero(va.rows(), va.cols());
    Matrix gb = Matrix::Zero(vb.rows(), vb.cols());
    for (Index i = 0; i < va.rows(); ++i)
      distance_backward(row_span(va, i), row_span(vb, i), c, eps, g(i, 0), {ga.data() + i * n, n},
                        {gb.data() + i * n, n});
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  });
}

Var hyp_distance_pairwise(const Var& a, const Var& b, double c, double eps) {
  if (a.cols() != b.cols()) throw ShapeError("hyp_distance_pairwise: dimension mismatch");
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  Matrix out(va.rows(), vb.rows());
  for (Index i = 0; i < va.rows(); ++i)
    for (Index j = 0; j < vb.rows(); ++j) out(i, j) = hyp::kernel::distance(row_span(va, i), row_span(vb, j), c, eps);
  return a.tape().record("hyp_distance_pairwise", std::move(out), {a, b}, [a, b, c, eps](Tape& t, const Matrix& g) {
    const Matrix& va = a.value();
    const Matrix& vb = b.value();
    const std::size_t n = static_cast<std::size_t>(va.cols());
    Matrix ga = Matrix::Zero(va.rows(), va.cols());
    Matrix gb = Matrix::Zero(vb.rows(), vb.cols());
    for (Index i = 0; i < va.rows(); ++i)
      for (Index j = 0; j < vb.rows(); ++j) {
        if (g(i, j) == 0.0) continue;
        distance_backward(row_span(va, i), row_span(vb, j), c, eps, g(i, j), {ga.data() + i * n, n},
                          {gb.data() + j * n, n});
      }
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  });
}

Var cosine_pairwise(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("cosine_pairwise: dimension mismatch");
  return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

// ---------------------------------------------------------------------------
// Gradient check

double grad_check(const Program& f, std::span<const Matrix> points, double h) {
  if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> inputs;
    for (const Matrix& p : points) inputs.push_back(tape.leaf(p, true));
    Var out = f(tape, inputs);
    if (!std::isfinite(out.scalar())) throw NumericError("grad_check: non-finite program value");
    tape.backward(out);
    for (const Var& in : inputs) analytic.push_back(in.grad());
  }
  auto evaluate = [&](std::size_t which, Index r, Index col, double delta) {
    Tape tape;
    std::vector<Var> inputs;
    for (std::size_t k = 0; k < points.size(); ++k) {
      Matrix p = points[k];
      if (k == which) p(r, col) += delta;
      inputs.push_back(tape.leaf(std::move(p), false));
    }
    const double v = f(tape, inputs).scalar();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite perturbed value");
    return v;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k)
    for (Index r = 0; r < points[k].rows(); ++r)
      for (Index col = 0; col < points[k].cols(); ++col) {
        const double numeric = (evaluate(k, r, col, h) - evaluate(k, r, col, -h)) / (2.0 * h);
        const double exact = analytic[k](r, col);
        const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(exact - numeric) / denom);
      }
  return worst;
}

double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Matrix& point, double h) {
  const Matrix pts[] = {point};
  return grad_check([&](Tape& t, std::span<const Var> in) { return f(t, in[0]); }, pts, h);
}

}  // namespace herl::ad
