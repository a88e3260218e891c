// SPDX-License-Identifier: Apache-2.0
#include "zss/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace zss {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Matrix sigmoid_of(const Matrix& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix fake_quantize(const Matrix& h, const StateQuantization& q) {
  const double scale = q.scale();
  const double qmax = static_cast<double>((1 << (q.bits - 1)) - 1);
  return h.unaryExpr([=](double v) {
    const double r = std::round(v / scale);
    return std::clamp(r, -qmax - 1.0, qmax) * scale;
  });
}

Matrix consumed_state(const Matrix& h_prev, const ForwardOptions& options) {
  Matrix consumed = options.prune.enabled
                        ? prune_state(h_prev, options.prune.threshold)
                        : h_prev;
  if (options.quant.enabled) consumed = fake_quantize(consumed, options.quant);
  return consumed;
}

StepCache step_forward(const LstmParams& params, const Matrix& x,
                       const Matrix& h_prev, const Matrix& c_prev,
                       const ForwardOptions& options) {
  const int d_h = params.d_h;
  require(x.rows() == params.d_x, "lstm step: input has " +
                                      std::to_string(x.rows()) +
                                      " rows, expected d_x=" +
                                      std::to_string(params.d_x));
  require(h_prev.rows() == d_h && c_prev.rows() == d_h,
          "lstm step: state size does not match d_h=" + std::to_string(d_h));
  require(x.cols() == h_prev.cols() && c_prev.cols() == h_prev.cols(),
          "lstm step: lane count mismatch");

  StepCache s;
  s.x = x;
  s.consumed = consumed_state(h_prev, options);
  s.c_prev = c_prev;

  Matrix z = params.w_h * s.consumed;
  z.noalias() += params.w_x * x;
  z.colwise() += params.b;

  s.preact = std::move(z);
  const Matrix& zr = s.preact;
  s.f = sigmoid_of(zr.middleRows(0, d_h));
  s.i = sigmoid_of(zr.middleRows(d_h, d_h));
  s.o = sigmoid_of(zr.middleRows(2 * d_h, d_h));
  s.g = zr.middleRows(3 * d_h, d_h).array().tanh().matrix();
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

StepResult to_step_result(StepCache&& s) {
  StepResult r;
  r.state.h = s.h.col(0);
  r.state.c = s.c.col(0);
  r.gates.f = s.f.col(0);
  r.gates.i = s.i.col(0);
  r.gates.o = s.o.col(0);
  r.gates.g = s.g.col(0);
  r.pruned_h = s.consumed.col(0);
  r.gates.preact = s.preact.col(0);
  return r;
}

}  // namespace

LstmParams LstmParams::zeros(int d_x, int d_h) {
  require(d_x >= 0 && d_h > 0, "LstmParams: d_h must be positive");
  LstmParams p;
  p.d_x = d_x;
  p.d_h = d_h;
  p.w_h = Matrix::Zero(4 * d_h, d_h);
  p.w_x = Matrix::Zero(4 * d_h, d_x);
  p.b = Vector::Zero(4 * d_h);
  return p;
}

void LstmParams::validate() const {
  require(d_h > 0, "LstmParams: d_h must be positive");
  require(d_x >= 0, "LstmParams: d_x must be non-negative");
  require(w_h.rows() == 4 * d_h && w_h.cols() == d_h,
          "LstmParams: w_h must be [4*d_h x d_h]");
  require(w_x.rows() == 4 * d_h && w_x.cols() == d_x,
          "LstmParams: w_x must be [4*d_h x d_x]");
  require(b.size() == 4 * d_h, "LstmParams: b must have 4*d_h entries");
}

LstmState LstmState::zeros(int d_h) {
  return {Vector::Zero(d_h), Vector::Zero(d_h)};
}

BatchState BatchState::zeros(int d_h, int lanes) {
  return {Matrix::Zero(d_h, lanes), Matrix::Zero(d_h, lanes)};
}

Vector prune_state(const Vector& h, double threshold) {
  return h.unaryExpr(
      [threshold](double v) { return std::abs(v) < threshold ? 0.0 : v; });
}

Matrix prune_state(const Matrix& h, double threshold) {
  return h.unaryExpr(
      [threshold](double v) { return std::abs(v) < threshold ? 0.0 : v; });
}

double zero_fraction(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return static_cast<double>((m.array() == 0.0).count()) /
         static_cast<double>(m.size());
}

StepResult lstm_step_dense(const LstmParams& params, const Vector& x,
                           const LstmState& state) {
  return to_step_result(step_forward(params, x, state.h, state.c, {}));
}

StepResult lstm_step_pruned(const LstmParams& params, const Vector& x,
                            const LstmState& state, const PruneConfig& prune) {
  ForwardOptions options;
  options.prune = prune;
  return to_step_result(step_forward(params, x, state.h, state.c, options));
}

SequenceCache forward_sequence(const LstmParams& params,
                               const std::vector<Matrix>& inputs,
                               const BatchState& initial,
                               const ForwardOptions& options) {
  SequenceCache cache;
  cache.steps.reserve(inputs.size());
  const Matrix* h = &initial.h;
  const Matrix* c = &initial.c;
  for (const Matrix& x : inputs) {
    cache.steps.push_back(step_forward(params, x, *h, *c, options));
    h = &cache.steps.back().h;
    c = &cache.steps.back().c;
  }
  cache.final_state = {*h, *c};
  return cache;
}

LstmGradients LstmGradients::zeros_like(const LstmParams& params, int lanes,
                                        std::size_t steps) {
  LstmGradients g;
  g.w_h = Matrix::Zero(params.w_h.rows(), params.w_h.cols());
  g.w_x = Matrix::Zero(params.w_x.rows(), params.w_x.cols());
  g.b = Vector::Zero(params.b.size());
  g.h0 = Matrix::Zero(params.d_h, lanes);
  g.c0 = Matrix::Zero(params.d_h, lanes);
  g.x.resize(steps);
  return g;
}

LstmGradients backward_sequence(const LstmParams& params,
                                const SequenceCache& cache,
                                const std::vector<Matrix>& dh_external) {
  const std::size_t steps = cache.steps.size();
  require(dh_external.size() == steps,
          "bptt: need one external gradient per step");
  const int d_h = params.d_h;
  const int lanes =
      steps == 0 ? static_cast<int>(cache.final_state.h.cols())
                 : static_cast<int>(cache.steps.front().x.cols());

  LstmGradients grads = LstmGradients::zeros_like(params, lanes, steps);
  Matrix dh_next = Matrix::Zero(d_h, lanes);
  Matrix dc_next = Matrix::Zero(d_h, lanes);
  Matrix dz(4 * d_h, lanes);

  for (std::size_t k = steps; k-- > 0;) {
    const StepCache& s = cache.steps[k];
    Matrix dh = dh_next;
    if (dh_external[k].size() != 0) dh += dh_external[k];

    const Matrix d_o = dh.cwiseProduct(s.tanh_c);
    const Matrix dc =
        dc_next + dh.cwiseProduct(s.o).cwiseProduct(
                      (1.0 - s.tanh_c.array().square()).matrix());

    dz.middleRows(0, d_h) = dc.cwiseProduct(s.c_prev).cwiseProduct(
        s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
    dz.middleRows(d_h, d_h) = dc.cwiseProduct(s.g).cwiseProduct(
        s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
    dz.middleRows(2 * d_h, d_h) =
        d_o.cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
    dz.middleRows(3 * d_h, d_h) = dc.cwiseProduct(s.i).cwiseProduct(
        (1.0 - s.g.array().square()).matrix());

    grads.w_h.noalias() += dz * s.consumed.transpose();
    grads.w_x.noalias() += dz * s.x.transpose();
    grads.b += dz.rowwise().sum();
    grads.x[k] = params.w_x.transpose() * dz;

    // Straight-through: d(consumed)/d(h_prev) is taken as the identity.
    dh_next = params.w_h.transpose() * dz;
    dc_next = dc.cwiseProduct(s.f);
  }
  grads.h0 = dh_next;
  grads.c0 = dc_next;
  return grads;
}

namespace {

struct LossTerm {
  double value = 0.0;
  Vector grad;
};

LossTerm loss_term(const Vector& h, const Vector& y, LossKind kind) {
  require(h.size() == y.size(), "bptt: target size does not match d_h");
  LossTerm t;
  if (kind == LossKind::kSquaredError) {
    const Vector diff = h - y;
    t.value = 0.5 * diff.squaredNorm();
    t.grad = diff;
  } else {
    const double m = h.maxCoeff();
    const Vector e = (h.array() - m).exp().matrix();
    const double z = e.sum();
    const Vector p = e / z;
    const double log_z = m + std::log(z);
    t.value = -(y.array() * (h.array() - log_z)).sum();
    t.grad = p * y.sum() - y;
  }
  return t;
}

std::vector<Matrix> as_columns(const std::vector<Vector>& v) {
  std::vector<Matrix> out;
  out.reserve(v.size());
  for (const Vector& x : v) out.emplace_back(x);
  return out;
}

}  // namespace

BpttResult bptt(const LstmParams& params, const std::vector<Vector>& inputs,
                const LstmState& initial, const std::vector<Vector>& targets,
                const PruneConfig& prune, LossKind loss,
                const StateQuantization& quant) {
  params.validate();
  require(!inputs.empty(), "bptt: sequence length must be at least 1");
  require(targets.size() == inputs.size(),
          "bptt: need one target per input step");

  ForwardOptions options{prune, quant};
  const SequenceCache cache = forward_sequence(
      params, as_columns(inputs), {Matrix(initial.h), Matrix(initial.c)},
      options);

  BpttResult result;
  std::vector<Matrix> dh_ext(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const LossTerm term =
        loss_term(cache.steps[t].h.col(0), targets[t], loss);
    if (!std::isfinite(term.value)) {
      throw std::runtime_error("bptt: non-finite loss at step " +
                               std::to_string(t));
    }
    result.loss += term.value;
    dh_ext[t] = term.grad;
  }
  result.grads = backward_sequence(params, cache, dh_ext);
  return result;
}

double sequence_loss(const LstmParams& params,
                     const std::vector<Vector>& inputs,
                     const LstmState& initial,
                     const std::vector<Vector>& targets,
                     const PruneConfig& prune, LossKind loss) {
  ForwardOptions options;
  options.prune = prune;
  const SequenceCache cache = forward_sequence(
      params, as_columns(inputs), {Matrix(initial.h), Matrix(initial.c)},
      options);
  double total = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    total += loss_term(cache.steps[t].h.col(0), targets[t], loss).value;
  }
  return total;
}

}  // namespace zss
