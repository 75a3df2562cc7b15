// SPDX-License-Identifier: Apache-2.0
#include "herl/hypmath.hpp"

#include <algorithm>
#include <cmath>

namespace herl::hyp {

namespace {

void require_same_ball(const BallPoint& x, const BallPoint& y, const char* op) {
  if (x.dim() != y.dim())
    throw ShapeError(std::string(op) + ": dimension mismatch " + std::to_string(x.dim()) + " vs " +
                     std::to_string(y.dim()));
  if (x.curvature() != y.curvature()) throw ShapeError(std::string(op) + ": curvature mismatch");
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

void HypConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("curvature c must be positive");
  if (!(cr > 0.0) || !std::isfinite(cr)) throw ConfigError("clipping threshold cr must be positive");
  if (!(eps > 0.0 && eps < 1e-3)) throw ConfigError("eps must lie in (0, 1e-3)");
}

BallPoint::BallPoint(Vector coords, double c) : coords_(std::move(coords)), c_(c) {
  if (!(c_ > 0.0) || !std::isfinite(c_)) throw ConfigError("BallPoint: curvature must be positive");
  if (coords_.size() < 1) throw ConfigError("BallPoint: dimension must be >= 1");
  if (!coords_.allFinite()) throw ConfigError("BallPoint: non-finite coordinates");
  if (c_ * coords_.squaredNorm() >= 1.0) throw BoundaryError("BallPoint: point is not strictly inside the ball");
}

BallPoint BallPoint::origin(Index dim, double c) { return BallPoint(Vector::Zero(dim), c); }

double conformal_factor(const BallPoint& x, double eps) {
  const double cx2 = x.curvature() * x.coords().squaredNorm();
  if (cx2 >= 1.0 - eps) throw BoundaryError("conformal_factor: point within eps of the boundary");
  return 2.0 / (1.0 - cx2);
}

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  require_same_ball(x, y, "mobius_add");
  Vector out(x.dim());
  kernel::mobius_add(as_span(x.coords()), as_span(y.coords()), {out.data(), static_cast<std::size_t>(out.size())},
                     x.curvature());
  return BallPoint(std::move(out), x.curvature());
}

BallPoint exp_map_origin(const Vector& z, const HypConfig& cfg) {
  cfg.validate();
  if (!z.allFinite()) throw NumericError("exp_map_origin: non-finite input");
  if (z.size() < 1) throw ConfigError("exp_map_origin: empty vector");
  return BallPoint(kernel::exp_map_scale(z.norm(), cfg.c, cfg.eps) * z, cfg.c);
}

Vector clip(const Vector& z, const HypConfig& cfg) { return kernel::clip_scale(z.norm(), cfg.cr) * z; }

BallPoint hyp_project(const Vector& z, const HypConfig& cfg) { return exp_map_origin(clip(z, cfg), cfg); }

double hyp_distance(const BallPoint& a, const BallPoint& b, double eps) {
  require_same_ball(a, b, "hyp_distance");
  return kernel::distance(as_span(a.coords()), as_span(b.coords()), a.curvature(), eps);
}

double angular_sim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("angular_sim: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("angular_sim: angle of a zero vector is undefined");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double angular_sim(const BallPoint& a, const BallPoint& b) { return angular_sim(a.coords(), b.coords()); }

double dist_sim(const BallPoint& a, const BallPoint& b, double eps) { return -hyp_distance(a, b, eps); }

namespace kernel {

double exp_map_scale(double norm, double c, double eps) {
  if (norm < kZeroNorm) return 1.0;
  const double sc = std::sqrt(c);
  const double t = std::min(std::tanh(sc * norm), 1.0 - eps);
  return t / (sc * norm);
}

double clip_scale(double norm, double cr) {
  if (norm < kZeroNorm || norm <= cr) return 1.0;
  return cr / norm;
}

MobiusTerms mobius_terms(double xx, double yy, double xy, double c) {
  return {1.0 + 2.0 * c * xy + c * yy, 1.0 - c * xx, 1.0 + 2.0 * c * xy + c * c * xx * yy};
}

void mobius_add(std::span<const double> x, std::span<const double> y, std::span<double> out, double c) {
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    xx += x[k] * x[k];
    yy += y[k] * y[k];
    xy += x[k] * y[k];
  }
  const MobiusTerms t = mobius_terms(xx, yy, xy, c);
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (t.alpha * x[k] + t.beta * y[k]) / t.den;
}

double distance(std::span<const double> a, std::span<const double> b, double c, double eps) {
  // |(-a) (+)_c b|^2 = |a - b|^2 / (1 - 2c<a,b> + c^2 |a|^2 |b|^2): symmetric in a, b
  // and free of the cancellation inside the Mobius sum.
  double aa = 0.0, bb = 0.0, ab = 0.0, dd = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    aa += a[k] * a[k];
    bb += b[k] * b[k];
    ab += a[k] * b[k];
    const double d = a[k] - b[k];
    dd += d * d;
  }
  const double den = 1.0 - 2.0 * c * ab + c * c * (aa * bb);
  const double sc = std::sqrt(c);
  const double arg = std::min(sc * std::sqrt(dd / den), 1.0 - eps);
  return 2.0 / sc * std::atanh(arg);
}

}  // namespace kernel

}  // namespace herl::hyp
