// SPDX-License-Identifier: Apache-2.0
//
// Student encoders f^v, shared projection head g, per-view prototype heads h^v
// and the EMA teacher (a copy of the encoders only).
#pragma once

#include "herl/common.hpp"
#include "herl/diffeng.hpp"
#include "herl/hypmath.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace herl::model {

struct ModelSpec {
  std::vector<Index> input_dims;  ///< one entry per view
  std::vector<Index> hidden{64};  ///< encoder hidden widths (tanh)
  Index embed_dim = 16;           ///< d
  Index prototypes = 10;          ///< K
  hyp::HypConfig hyp;
  std::uint64_t seed = 0;
  /// Row softmax before the prototype heads' ball projection.
  bool prototype_softmax = false;

  Index views() const { return static_cast<Index>(input_dims.size()); }
  void validate() const;
};

struct Linear {
  Matrix W;  ///< in x out
  Matrix b;  ///< 1 x out
};
using Mlp = std::vector<Linear>;

struct StudentParams {
  std::vector<Mlp> encoders;
  Mlp projector;
  std::vector<Linear> proto_heads;
};

struct ModelState {
  ModelSpec spec;
  StudentParams student;
  std::vector<Mlp> teacher;
  double momentum = 0.98;

  using Visitor = std::function<void(const std::string& name, Matrix& value)>;
  using ConstVisitor = std::function<void(const std::string& name, const Matrix& value)>;

  /// Student parameters in a fixed order (the optimizer relies on it).
  void for_each_student(const Visitor& f);
  void for_each_student(const ConstVisitor& f) const;
  /// Student then teacher parameters, prefixed "student." / "teacher.".
  void for_each_param(const Visitor& f);
  void for_each_param(const ConstVisitor& f) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases from spec.seed;
/// teacher starts as an exact copy of the student encoders.
ModelState init_model(const ModelSpec& spec, double momentum = 0.98);

/// teacher <- m teacher + (1 - m) student, elementwise over encoder params.
void ema_update(ModelState& state, double m);

// On-tape views of the parameters.
struct BoundLinear {
  ad::Var W;
  ad::Var b;
};
using BoundMlp = std::vector<BoundLinear>;

struct BoundStudent {
  std::vector<BoundMlp> encoders;
  BoundMlp projector;
  std::vector<BoundLinear> proto_heads;

  /// Same order as ModelState::for_each_student.
  std::vector<ad::Var> flat() const;
};

BoundStudent bind_student(ad::Tape& tape, const StudentParams& params, bool requires_grad);
BoundMlp bind_constant(ad::Tape& tape, const Mlp& mlp);
/// Regroups variables given in BoundStudent::flat() order into the layout of
/// `params`. Throws ShapeError on a count or shape mismatch.
BoundStudent regroup_student(const StudentParams& params, std::span<const ad::Var> flat);

/// MLP with tanh hidden layers and linear output, rows l2-normalized.
ad::Var encode(const BoundMlp& encoder, const ad::Var& x);
/// g: affine, tanh, affine.
ad::Var project(const BoundMlp& projector, const ad::Var& f);
/// Affine map to K columns followed by the row-wise ball projection.
ad::Var prototype_head(const BoundLinear& head, const ad::Var& z, const hyp::HypConfig& cfg, bool softmax = false);

struct ViewOutputs {
  ad::Var F;      ///< student features
  ad::Var Ft;     ///< teacher features (no gradient)
  ad::Var Z;      ///< g(F)
  ad::Var Q_hat;  ///< H(Z)
  ad::Var Q;      ///< H(Ft)
  ad::Var P_hat;  ///< h^v(Z)
  ad::Var P;      ///< h^v(Ft), detached
};

struct ForwardPass {
  BoundStudent student;
  std::vector<ViewOutputs> views;
};

/// One batch of complete samples, one matrix per view (same row count).
ForwardPass forward_views(ad::Tape& tape, const ModelState& state, std::span<const Matrix> batch);
/// Same, with student parameters already on the tape.
ForwardPass forward_views(ad::Tape& tape, const ModelState& state, BoundStudent student,
                          std::span<const Matrix> batch);

/// Teacher features F_t^v for every row of x (off-tape evaluation).
Matrix teacher_features(const ModelState& state, Index view, const Matrix& x);
/// g applied to features (off-tape evaluation).
Matrix apply_projector(const ModelState& state, const Matrix& features);

}  // namespace herl::model
