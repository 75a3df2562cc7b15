// SPDX-License-Identifier: Apache-2.0
#include "herl/netmodel.hpp"

#include "herl/rng.hpp"

#include <cmath>

namespace herl::model {

void ModelSpec::validate() const {
  if (input_dims.empty()) throw ConfigError("model: at least one view is required");
  for (Index d : input_dims)
    if (d < 1) throw ConfigError("model: view input dimension must be >= 1");
  if (hidden.empty()) throw ConfigError("model: hidden widths list must be nonempty");
  for (Index w : hidden)
    if (w < 1) throw ConfigError("model: hidden widths must be >= 1");
  if (embed_dim < 2) throw ConfigError("model: embed_dim must be >= 2");
  if (prototypes < 1) throw ConfigError("model: prototype count K must be >= 1");
  hyp.validate();
}

namespace {

Linear make_linear(Index in, Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear layer{Matrix(in, out), Matrix(1, out)};
  for (Index i = 0; i < layer.W.size(); ++i) layer.W.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
  for (Index i = 0; i < layer.b.size(); ++i) layer.b.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
  return layer;
}

template <class Params, class F>
void visit_student(Params& s, F&& f) {
  for (std::size_t v = 0; v < s.encoders.size(); ++v)
    for (std::size_t l = 0; l < s.encoders[v].size(); ++l) {
      const std::string p = "enc" + std::to_string(v) + ".layer" + std::to_string(l);
      f(p + ".W", s.encoders[v][l].W);
      f(p + ".b", s.encoders[v][l].b);
    }
  for (std::size_t l = 0; l < s.projector.size(); ++l) {
    const std::string p = "g.layer" + std::to_string(l);
    f(p + ".W", s.projector[l].W);
    f(p + ".b", s.projector[l].b);
  }
  for (std::size_t v = 0; v < s.proto_heads.size(); ++v) {
    const std::string p = "h" + std::to_string(v);
    f(p + ".W", s.proto_heads[v].W);
    f(p + ".b", s.proto_heads[v].b);
  }
}

template <class Teacher, class F>
void visit_teacher(Teacher& t, F&& f) {
  for (std::size_t v = 0; v < t.size(); ++v)
    for (std::size_t l = 0; l < t[v].size(); ++l) {
      const std::string p = "enc" + std::to_string(v) + ".layer" + std::to_string(l);
      f(p + ".W", t[v][l].W);
      f(p + ".b", t[v][l].b);
    }
}

}  // namespace

void ModelState::for_each_student(const Visitor& f) { visit_student(student, f); }

void ModelState::for_each_student(const ConstVisitor& f) const { visit_student(student, f); }

void ModelState::for_each_param(const Visitor& f) {
  visit_student(student, [&](const std::string& n, Matrix& m) { f("student." + n, m); });
  visit_teacher(teacher, [&](const std::string& n, Matrix& m) { f("teacher." + n, m); });
}

void ModelState::for_each_param(const ConstVisitor& f) const {
  visit_student(student, [&](const std::string& n, const Matrix& m) { f("student." + n, m); });
  visit_teacher(teacher, [&](const std::string& n, const Matrix& m) { f("teacher." + n, m); });
}

ModelState init_model(const ModelSpec& spec, double momentum) {
  spec.validate();
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("model: momentum must lie in [0, 1)");
  Rng rng(spec.seed);
  ModelState state{spec, {}, {}, momentum};
  for (Index v = 0; v < spec.views(); ++v) {
    Mlp enc;
    Index in = spec.input_dims[static_cast<std::size_t>(v)];
    for (Index w : spec.hidden) {
      enc.push_back(make_linear(in, w, rng));
      in = w;
    }
    enc.push_back(make_linear(in, spec.embed_dim, rng));
    state.student.encoders.push_back(std::move(enc));
  }
  state.student.projector.push_back(make_linear(spec.embed_dim, spec.embed_dim, rng));
  state.student.projector.push_back(make_linear(spec.embed_dim, spec.embed_dim, rng));
  for (Index v = 0; v < spec.views(); ++v)
    state.student.proto_heads.push_back(make_linear(spec.embed_dim, spec.prototypes, rng));
  state.teacher = state.student.encoders;
  return state;
}

void ema_update(ModelState& state, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("ema_update: momentum must lie in [0, 1]");
  if (state.teacher.size() != state.student.encoders.size()) throw ShapeError("ema_update: teacher/student view count drift");
  for (std::size_t v = 0; v < state.teacher.size(); ++v) {
    auto& t = state.teacher[v];
    const auto& s = state.student.encoders[v];
    if (t.size() != s.size()) throw ShapeError("ema_update: layer count drift");
    for (std::size_t l = 0; l < t.size(); ++l) {
      if (t[l].W.rows() != s[l].W.rows() || t[l].W.cols() != s[l].W.cols() || t[l].b.cols() != s[l].b.cols())
        throw ShapeError("ema_update: parameter shape drift");
      t[l].W = m * t[l].W + (1.0 - m) * s[l].W;
      t[l].b = m * t[l].b + (1.0 - m) * s[l].b;
    }
  }
}

std::vector<ad::Var> BoundStudent::flat() const {
  std::vector<ad::Var> out;
  for (const auto& enc : encoders)
    for (const auto& l : enc) {
      out.push_back(l.W);
      out.push_back(l.b);
    }
  for (const auto& l : projector) {
    out.push_back(l.W);
    out.push_back(l.b);
  }
  for (const auto& h : proto_heads) {
    out.push_back(h.W);
    out.push_back(h.b);
  }
  return out;
}

namespace {

BoundLinear bind_linear(ad::Tape& tape, const Linear& l, bool requires_grad) {
  return {tape.leaf(l.W, requires_grad), tape.leaf(l.b, requires_grad)};
}

BoundMlp bind_mlp(ad::Tape& tape, const Mlp& mlp, bool requires_grad) {
  BoundMlp out;
  for (const auto& l : mlp) out.push_back(bind_linear(tape, l, requires_grad));
  return out;
}

ad::Var run_mlp(const BoundMlp& mlp, ad::Var h) {
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    h = ad::affine(h, mlp[l].W, mlp[l].b);
    if (l + 1 < mlp.size()) h = ad::tanh_act(h);
  }
  return h;
}

}  // namespace

BoundStudent bind_student(ad::Tape& tape, const StudentParams& params, bool requires_grad) {
  BoundStudent out;
  for (const auto& enc : params.encoders) out.encoders.push_back(bind_mlp(tape, enc, requires_grad));
  out.projector = bind_mlp(tape, params.projector, requires_grad);
  for (const auto& h : params.proto_heads) out.proto_heads.push_back(bind_linear(tape, h, requires_grad));
  return out;
}

BoundMlp bind_constant(ad::Tape& tape, const Mlp& mlp) { return bind_mlp(tape, mlp, false); }

BoundStudent regroup_student(const StudentParams& params, std::span<const ad::Var> flat) {
  std::size_t next = 0;
  auto take = [&](const Matrix& like) {
    if (next >= flat.size()) throw ShapeError("regroup_student: too few variables");
    const ad::Var& v = flat[next++];
    if (v.rows() != like.rows() || v.cols() != like.cols())
      throw ShapeError("regroup_student: variable " + std::to_string(next - 1) + " is " + shape_str(v.rows(), v.cols()) +
                       ", expected " + shape_str(like.rows(), like.cols()));
    return v;
  };
  auto take_linear = [&](const Linear& l) {
    BoundLinear b;
    b.W = take(l.W);
    b.b = take(l.b);
    return b;
  };
  BoundStudent out;
  for (const auto& enc : params.encoders) {
    BoundMlp m;
    for (const auto& l : enc) m.push_back(take_linear(l));
    out.encoders.push_back(std::move(m));
  }
  for (const auto& l : params.projector) out.projector.push_back(take_linear(l));
  for (const auto& h : params.proto_heads) out.proto_heads.push_back(take_linear(h));
  if (next != flat.size()) throw ShapeError("regroup_student: too many variables");
  return out;
}

ad::Var encode(const BoundMlp& encoder, const ad::Var& x) { return ad::l2_normalize_rows(run_mlp(encoder, x)); }

ad::Var project(const BoundMlp& projector, const ad::Var& f) { return run_mlp(projector, f); }

ad::Var prototype_head(const BoundLinear& head, const ad::Var& z, const hyp::HypConfig& cfg, bool softmax) {
  ad::Var logits = ad::affine(z, head.W, head.b);
  if (softmax) logits = ad::exp_act(ad::row_logsoftmax(logits));
  return ad::hyp_project_rows(logits, cfg);
}

ForwardPass forward_views(ad::Tape& tape, const ModelState& state, std::span<const Matrix> batch) {
  return forward_views(tape, state, bind_student(tape, state.student, true), batch);
}

ForwardPass forward_views(ad::Tape& tape, const ModelState& state, BoundStudent student,
                          std::span<const Matrix> batch) {
  const ModelSpec& spec = state.spec;
  if (static_cast<Index>(batch.size()) != spec.views())
    throw ShapeError("forward_views: expected " + std::to_string(spec.views()) + " views, got " +
                     std::to_string(batch.size()));
  for (std::size_t v = 0; v < batch.size(); ++v) {
    if (batch[v].cols() != spec.input_dims[v])
      throw ShapeError("forward_views: view " + std::to_string(v) + " has width " + std::to_string(batch[v].cols()) +
                       ", model expects " + std::to_string(spec.input_dims[v]));
    if (batch[v].rows() != batch[0].rows()) throw ShapeError("forward_views: views disagree on batch size");
  }
  ForwardPass pass{std::move(student), {}};
  for (std::size_t v = 0; v < batch.size(); ++v) {
    BoundMlp teacher = bind_constant(tape, state.teacher[v]);
    const auto& h = state.student.proto_heads[v];
    BoundLinear frozen_head{tape.constant(h.W), tape.constant(h.b)};

    ad::Var x = tape.constant(batch[v]);
    ViewOutputs out;
    out.F = encode(pass.student.encoders[v], x);
    out.Ft = encode(teacher, x);
    out.Z = project(pass.student.projector, out.F);
    out.Q_hat = ad::hyp_project_rows(out.Z, spec.hyp);
    out.Q = ad::hyp_project_rows(out.Ft, spec.hyp);
    out.P_hat = prototype_head(pass.student.proto_heads[v], out.Z, spec.hyp, spec.prototype_softmax);
    out.P = prototype_head(frozen_head, out.Ft, spec.hyp, spec.prototype_softmax);
    pass.views.push_back(out);
  }
  return pass;
}

Matrix teacher_features(const ModelState& state, Index view, const Matrix& x) {
  if (view < 0 || view >= state.spec.views()) throw ShapeError("teacher_features: view out of range");
  if (x.cols() != state.spec.input_dims[static_cast<std::size_t>(view)])
    throw ShapeError("teacher_features: input width mismatch for view " + std::to_string(view));
  ad::Tape tape;
  return encode(bind_constant(tape, state.teacher[static_cast<std::size_t>(view)]), tape.constant(x)).value();
}

Matrix apply_projector(const ModelState& state, const Matrix& features) {
  if (features.cols() != state.spec.embed_dim) throw ShapeError("apply_projector: feature width mismatch");
  ad::Tape tape;
  return project(bind_constant(tape, state.student.projector), tape.constant(features)).value();
}

}  // namespace herl::model
