// SPDX-License-Identifier: Apache-2.0
//
// Poincare-ball primitives for curvature -c: the open ball {a : c|a|^2 < 1}.
// Every hyperbolic objective in the library goes through these functions (or
// the span kernels below, which the differentiable tensor ops share so that
// forward values agree bit for bit).
#pragma once

#include "herl/common.hpp"

#include <span>

namespace herl::hyp {

inline constexpr double kDefaultEps = 1e-7;
/// Below this norm a vector is treated as zero (limit value, no division).
inline constexpr double kZeroNorm = 1e-12;

struct HypConfig {
  double c = 0.1;     ///< curvature magnitude
  double cr = 1.0;    ///< clipping threshold on the Euclidean norm before the exp map
  double eps = kDefaultEps;

  /// Throws ConfigError unless c > 0, cr > 0 and eps in (0, 1e-3).
  void validate() const;
};

/// A coordinate vector strictly inside the ball of curvature c.
class BallPoint {
 public:
  /// Throws ConfigError for c <= 0, empty or non-finite coordinates and
  /// BoundaryError when c|x|^2 >= 1.
  BallPoint(Vector coords, double c);

  static BallPoint origin(Index dim, double c);

  const Vector& coords() const { return coords_; }
  double curvature() const { return c_; }
  Index dim() const { return coords_.size(); }

  BallPoint operator-() const { return BallPoint(-coords_, c_); }

 private:
  Vector coords_;
  double c_;
};

/// lambda_c(x) = 2 / (1 - c|x|^2). Throws BoundaryError if c|x|^2 >= 1 - eps.
double conformal_factor(const BallPoint& x, double eps = kDefaultEps);

/// Mobius addition x (+)_c y. Throws ShapeError on dimension or curvature mismatch.
BallPoint mobius_add(const BallPoint& x, const BallPoint& y);

/// tanh(sqrt(c)|z|) z / (sqrt(c)|z|); zero maps to the origin. The tanh factor
/// is capped at 1 - eps so the result stays strictly inside the ball even when
/// tanh saturates in double precision.
BallPoint exp_map_origin(const Vector& z, const HypConfig& cfg);

/// min{1, cr/|z|} z; vectors with |z| < kZeroNorm pass through.
Vector clip(const Vector& z, const HypConfig& cfg);

/// exp_map_origin(clip(z)).
BallPoint hyp_project(const Vector& z, const HypConfig& cfg);

/// (2/sqrt(c)) artanh(sqrt(c) |(-a) (+)_c b|), artanh argument capped at 1 - eps.
double hyp_distance(const BallPoint& a, const BallPoint& b, double eps = kDefaultEps);

/// Cosine of the angle between coordinate vectors. Throws DomainError for a
/// zero vector and ShapeError on dimension mismatch.
double angular_sim(const Vector& a, const Vector& b);
double angular_sim(const BallPoint& a, const BallPoint& b);

/// -hyp_distance(a, b).
double dist_sim(const BallPoint& a, const BallPoint& b, double eps = kDefaultEps);

namespace kernel {

/// Factor s with exp_map_origin(z) = s * z, given |z|.
double exp_map_scale(double norm, double c, double eps);

/// Factor s with clip(z) = s * z, given |z|.
double clip_scale(double norm, double cr);

/// Scalars of x (+)_c y: out = (alpha x + beta y) / den.
struct MobiusTerms {
  double alpha;
  double beta;
  double den;
};
MobiusTerms mobius_terms(double xx, double yy, double xy, double c);

void mobius_add(std::span<const double> x, std::span<const double> y, std::span<double> out, double c);

/// Distance between raw coordinate rows; same arithmetic as hyp_distance.
double distance(std::span<const double> a, std::span<const double> b, double c, double eps);

}  // namespace kernel

}  // namespace herl::hyp
