// SPDX-License-Identifier: Apache-2.0
/**
 * @file   training.hpp
 * @brief  Losses, metrics, optimizers and the pruned-state training loop.
 *
 * The loop runs the pruned forward pass, a softmax classifier on the dense
 * hidden state, straight-through backpropagation, optional global-norm
 * clipping and an ADAM or SGD step on dense master weights. With
 * quantization enabled every forward pass uses 8-bit copies of the weights
 * and of the consumed hidden state.
 */
#pragma once

#include "zss/datasets.hpp"
#include "zss/lstm.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace zss {

enum class TaskKind { kCharLm, kWordLm, kSeqMnist };
enum class MetricKind { kBpc, kPpw, kMer };
enum class OptimizerKind { kAdam, kSgd };

const char* to_string(TaskKind task);
const char* to_string(MetricKind metric);
TaskKind task_from_string(const std::string& name);

struct TaskConfig {
  TaskKind task = TaskKind::kCharLm;
  int d_h = 64;
  int sequence_length = 50;
  int batch_size = 32;
  int epochs = 1;
  double dropout_p = 0.0;
  std::optional<double> grad_clip_norm;
  std::optional<int> embedding_dim;
  std::vector<double> threshold_sweep;

  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 0.002;
  /// lr /= lr_decay whenever the validation metric fails to improve.
  double lr_decay = 1.0;
  /// Pruning threshold used by train_task.
  double threshold = 0.0;
  bool quantize = true;
  int quant_bits = 8;
  /// Caps on batches per epoch / per evaluation pass (0 = no cap).
  int max_train_batches = 0;
  int max_eval_batches = 0;
  /// seq_mnist: pixels per time step (1 = scanline, 28 = one row per step).
  int mnist_row_width = 1;
  int mnist_train_limit = 0;
  int mnist_test_limit = 0;
  /// Relative metric slack that still counts as "no degradation".
  double sweet_spot_tolerance = 0.005;
  /// Full-scale configs that take hours to days on a CPU.
  bool extended = false;

  MetricKind metric() const;
  std::vector<std::string> validation_errors() const;
  /// Throws std::invalid_argument listing every field error.
  void validate() const;

  static TaskConfig full_char();
  static TaskConfig full_word();
  static TaskConfig full_mnist();
  static TaskConfig desk_char();
  static TaskConfig desk_word();
  static TaskConfig desk_mnist();
};

// ---------------------------------------------------------------------------
// Losses and metrics

/// -log softmax(logits)[target], max-subtracted.
double cross_entropy(std::span<const double> logits, int target);
double bpc(double mean_loss_nats);
double ppw(double mean_loss_nats);
double mer(std::span<const int> predictions, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Optimizers

struct ParamSlot {
  std::span<double> value;
  std::span<const double> grad;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay_factor = 1.0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// Bias-corrected ADAM step number @p step (1-based). Moments are sized on
/// first use.
void adam_update(std::span<const ParamSlot> slots, OptimizerState& state,
                 int step);
void sgd_update(std::span<const ParamSlot> slots, double learning_rate);

double global_norm(std::span<const std::span<double>> grads);
/// Rescales all gradients together iff their global L2 norm exceeds
/// @p max_norm. Returns the norm before clipping.
double clip_gradients(std::span<const std::span<double>> grads, double max_norm);

/// Inverted dropout. Identity when !training or p == 0.
Vector apply_dropout(const Vector& x, double p, std::mt19937_64& rng,
                     bool training);
/// Mask of 0 and 1/(1-p) entries.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                    std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Model and loop

struct Model {
  LstmParams lstm;
  Matrix embedding;  // [E x V]; empty unless word_lm
  Matrix w_out;      // [classes x d_h]
  Vector b_out;      // [classes]

  int input_classes() const;  // vocabulary size (LM) or 0
  int output_classes() const { return static_cast<int>(w_out.rows()); }
};

struct TaskData {
  std::vector<int> train, valid, test;
  int vocab_size = 0;
  ImageSet images_train, images_test;

  static TaskData from_corpus(const TokenCorpus& corpus);
  static TaskData from_mnist(const MnistData& mnist);
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;      // mean training cross-entropy (nats)
  double metric = 0.0;    // validation BPC / PPW / MER
  double sparsity = 0.0;  // % zeros of the pruned state on validation
};

struct EvalResult {
  double mean_loss = 0.0;
  double metric = 0.0;
  double sparsity = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::vector<double> batch_losses;
  EvalResult final_eval;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::vector<EpochLog> log)
      : std::runtime_error(what), log_(std::move(log)) {}
  const std::vector<EpochLog>& log() const { return log_; }

 private:
  std::vector<EpochLog> log_;
};

Model init_model(const TaskConfig& config, const TaskData& data,
                 std::mt19937_64& rng);

/// Evaluates @p model on the validation split (or test when @p use_test)
/// with pruning threshold @p threshold.
EvalResult evaluate(const Model& model, const TaskConfig& config,
                    const TaskData& data, double threshold,
                    bool use_test = false);

/// Consumed (pruned, quantized when enabled) hidden states of @p lanes
/// independent streams, one [d_h x lanes] matrix per step, at most @p steps.
/// LM tasks split the split's token stream into contiguous chunks; MNIST runs
/// consecutive groups of images. The all-zero initial states are omitted.
std::vector<Matrix> consumed_states(const Model& model, const TaskConfig& config,
                                    const TaskData& data, double threshold, int lanes,
                                    int steps, bool use_test = true);

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train_task(const TaskConfig& config, const TaskData& data,
                       std::uint64_t seed, const EpochCallback& on_epoch = {});

struct SweepRow {
  double threshold = 0.0;
  double sparsity = 0.0;
  double metric = 0.0;
  MetricKind metric_kind = MetricKind::kBpc;
  std::string error;  // non-empty when training this row failed
  bool sweet_spot = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by sparsity
  double dense_metric = 0.0;
  std::optional<std::size_t> sweet_spot;
};

SweepResult sparsity_sweep(const TaskConfig& config, const TaskData& data,
                           const std::vector<double>& thresholds,
                           std::uint64_t seed);

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log);
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);

}  // namespace zss
