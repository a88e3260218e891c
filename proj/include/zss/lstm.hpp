// SPDX-License-Identifier: Apache-2.0
/**
 * @file   lstm.hpp
 * @brief  LSTM cell with hidden-state pruning.
 *
 * Weight layout: the four gate blocks are stacked along the row axis in the
 * order (f, i, o, g), so w_h is [4*d_h x d_h], w_x is [4*d_h x d_x] and b is
 * [4*d_h]. Row r of gate k is row k*d_h + r. Columns index input positions,
 * which is also how the accelerator walks the matrix.
 *
 * Pruning zeroes every |h_j| < T of the state *consumed* by the recurrent
 * product. The state carried to the next step stays dense; the backward pass
 * treats pruning (and fake quantization) as the identity.
 */
#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace zss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::string_view kGateOrder = "fiog";

enum class Gate { kForget = 0, kInput = 1, kOutput = 2, kCell = 3 };

struct LstmParams {
  int d_x = 0;
  int d_h = 0;
  Matrix w_h;  // [4*d_h x d_h]
  Matrix w_x;  // [4*d_h x d_x]
  Vector b;    // [4*d_h]

  static LstmParams zeros(int d_x, int d_h);
  /// Throws std::invalid_argument when shapes disagree with d_x/d_h.
  void validate() const;
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(int d_h);
};

struct PruneConfig {
  double threshold = 0.0;
  bool enabled = false;

  /// Effective threshold; 0 when disabled.
  double active_threshold() const { return enabled ? threshold : 0.0; }
};

/// Fake quantization of the consumed state in the forward pass.
struct StateQuantization {
  bool enabled = false;
  int bits = 8;
  /// |h| <= 1, so a fixed scale of 1/(2^(bits-1)-1) covers the range.
  double scale() const { return 1.0 / static_cast<double>((1 << (bits - 1)) - 1); }
};

struct GateActivations {
  Vector f, i, o, g;
  Vector preact;  // [4*d_h], stacked (f, i, o, g)
};

struct StepResult {
  LstmState state;
  GateActivations gates;
  Vector pruned_h;  // the state actually multiplied by w_h
};

Vector prune_state(const Vector& h, double threshold);
Matrix prune_state(const Matrix& h, double threshold);

/// Fraction of exactly-zero entries.
double zero_fraction(const Matrix& m);

StepResult lstm_step_dense(const LstmParams& params, const Vector& x,
                           const LstmState& state);
StepResult lstm_step_pruned(const LstmParams& params, const Vector& x,
                            const LstmState& state, const PruneConfig& prune);

// ---------------------------------------------------------------------------
// Batched sequence forward/backward. Columns of every matrix are lanes.

struct BatchState {
  Matrix h;  // [d_h x B]
  Matrix c;  // [d_h x B]

  static BatchState zeros(int d_h, int lanes);
};

struct StepCache {
  Matrix x;         // [d_x x B]
  Matrix consumed;  // pruned (and possibly quantized) h_{t-1}
  Matrix c_prev;
  Matrix preact;  // [4*d_h x B]
  Matrix f, i, o, g;
  Matrix c;
  Matrix tanh_c;
  Matrix h;
};

struct SequenceCache {
  std::vector<StepCache> steps;
  BatchState final_state;
};

struct ForwardOptions {
  PruneConfig prune;
  StateQuantization quant;
};

SequenceCache forward_sequence(const LstmParams& params,
                               const std::vector<Matrix>& inputs,
                               const BatchState& initial,
                               const ForwardOptions& options = {});

struct LstmGradients {
  Matrix w_h;
  Matrix w_x;
  Vector b;
  Matrix h0;  // gradient on the initial hidden state (straight-through)
  Matrix c0;
  std::vector<Matrix> x;  // per-step input gradients

  static LstmGradients zeros_like(const LstmParams& params, int lanes,
                                  std::size_t steps);
};

/// Backpropagation through time. @p dh_external holds dL/dh_t coming from
/// outside the recurrence (one [d_h x B] matrix per step, may be empty
/// matrices for steps with no external loss).
LstmGradients backward_sequence(const LstmParams& params,
                                const SequenceCache& cache,
                                const std::vector<Matrix>& dh_external);

enum class LossKind {
  kSquaredError,  ///< 0.5 * sum_t ||h_t - y_t||^2
  kCrossEntropy,  ///< -sum_t y_t . log softmax(h_t), y_t a distribution
};

struct BpttResult {
  double loss = 0.0;
  LstmGradients grads;
};

/// Single-sequence loss and gradients. Throws std::runtime_error naming the
/// step index when the loss becomes non-finite.
BpttResult bptt(const LstmParams& params, const std::vector<Vector>& inputs,
                const LstmState& initial, const std::vector<Vector>& targets,
                const PruneConfig& prune, LossKind loss,
                const StateQuantization& quant = {});

/// Loss only (same forward as bptt); used by finite-difference checks.
double sequence_loss(const LstmParams& params,
                     const std::vector<Vector>& inputs,
                     const LstmState& initial,
                     const std::vector<Vector>& targets,
                     const PruneConfig& prune, LossKind loss);

}  // namespace zss
