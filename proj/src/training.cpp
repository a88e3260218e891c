// SPDX-License-Identifier: Apache-2.0
#include "zss/training.hpp"

#include "zss/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace zss {

// ---------------------------------------------------------------------------
// Names and configs

const char* to_string(TaskKind task) {
  switch (task) {
    case TaskKind::kCharLm: return "char_lm";
    case TaskKind::kWordLm: return "word_lm";
    case TaskKind::kSeqMnist: return "seq_mnist";
  }
  return "?";
}

const char* to_string(MetricKind metric) {
  switch (metric) {
    case MetricKind::kBpc: return "BPC";
    case MetricKind::kPpw: return "PPW";
    case MetricKind::kMer: return "MER";
  }
  return "?";
}

TaskKind task_from_string(const std::string& name) {
  if (name == "char_lm" || name == "char") return TaskKind::kCharLm;
  if (name == "word_lm" || name == "word") return TaskKind::kWordLm;
  if (name == "seq_mnist" || name == "mnist") return TaskKind::kSeqMnist;
  throw std::invalid_argument("unknown task '" + name +
                              "' (expected char, word or mnist)");
}

MetricKind TaskConfig::metric() const {
  switch (task) {
    case TaskKind::kCharLm: return MetricKind::kBpc;
    case TaskKind::kWordLm: return MetricKind::kPpw;
    case TaskKind::kSeqMnist: return MetricKind::kMer;
  }
  return MetricKind::kBpc;
}

std::vector<std::string> TaskConfig::validation_errors() const {
  std::vector<std::string> errs;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  check(d_h >= 1, "d_h: must be >= 1 (got " + std::to_string(d_h) + ")");
  check(sequence_length >= 1, "sequence_length: must be >= 1");
  check(batch_size >= 1, "batch_size: must be >= 1");
  check(epochs >= 1, "epochs: must be >= 1");
  check(dropout_p >= 0.0 && dropout_p < 1.0, "dropout_p: must lie in [0, 1)");
  check(!grad_clip_norm || *grad_clip_norm > 0.0,
        "grad_clip_norm: must be positive when set");
  check(learning_rate > 0.0, "learning_rate: must be positive");
  check(lr_decay >= 1.0, "lr_decay: must be >= 1");
  check(threshold >= 0.0, "threshold: must be non-negative");
  check(quant_bits >= 2 && quant_bits <= 8, "quant_bits: must lie in [2, 8]");
  check(max_train_batches >= 0 && max_eval_batches >= 0,
        "max_*_batches: must be non-negative");
  check(sweet_spot_tolerance >= 0.0, "sweet_spot_tolerance: must be >= 0");
  if (task == TaskKind::kWordLm) {
    check(embedding_dim.has_value() && *embedding_dim >= 1,
          "embedding_dim: required (>= 1) for word_lm");
  } else {
    check(!embedding_dim.has_value(),
          "embedding_dim: only valid for word_lm");
  }
  if (task == TaskKind::kSeqMnist) {
    check(mnist_row_width >= 1 && 784 % mnist_row_width == 0,
          "mnist_row_width: must divide 784");
    check(mnist_train_limit >= 0 && mnist_test_limit >= 0,
          "mnist_*_limit: must be non-negative");
  }
  for (double t : threshold_sweep) {
    check(t >= 0.0, "threshold_sweep: thresholds must be non-negative");
  }
  check(std::is_sorted(threshold_sweep.begin(), threshold_sweep.end()),
        "threshold_sweep: must be sorted ascending");
  return errs;
}

void TaskConfig::validate() const {
  const auto errs = validation_errors();
  if (errs.empty()) return;
  std::string msg = "invalid task config:";
  for (const auto& e : errs) msg += "\n  " + e;
  throw std::invalid_argument(msg);
}

TaskConfig TaskConfig::full_char() {
  TaskConfig c;
  c.task = TaskKind::kCharLm;
  c.d_h = 1000;
  c.sequence_length = 100;
  c.batch_size = 64;
  c.epochs = 20;
  c.learning_rate = 0.002;
  c.threshold_sweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  c.extended = true;
  return c;
}

TaskConfig TaskConfig::full_word() {
  TaskConfig c;
  c.task = TaskKind::kWordLm;
  c.d_h = 300;
  c.embedding_dim = 300;
  c.sequence_length = 35;
  c.batch_size = 20;
  c.epochs = 40;
  c.dropout_p = 0.5;
  c.grad_clip_norm = 5.0;
  c.optimizer = OptimizerKind::kSgd;
  c.learning_rate = 1.0;
  c.lr_decay = 1.2;
  c.threshold_sweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  c.extended = true;
  return c;
}

TaskConfig TaskConfig::full_mnist() {
  TaskConfig c;
  c.task = TaskKind::kSeqMnist;
  c.d_h = 100;
  c.sequence_length = 784;
  c.batch_size = 64;
  c.epochs = 50;
  c.learning_rate = 0.001;
  c.mnist_row_width = 1;
  c.threshold_sweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  c.extended = true;
  return c;
}

TaskConfig TaskConfig::desk_char() {
  TaskConfig c;
  c.task = TaskKind::kCharLm;
  c.d_h = 64;
  c.sequence_length = 50;
  c.batch_size = 32;
  c.epochs = 40;
  c.learning_rate = 0.001;
  c.grad_clip_norm = 1.0;
  c.threshold_sweep = {0.0, 0.6, 0.65, 0.7, 0.75};
  return c;
}

TaskConfig TaskConfig::desk_word() {
  TaskConfig c;
  c.task = TaskKind::kWordLm;
  c.d_h = 64;
  c.embedding_dim = 32;
  c.sequence_length = 20;
  c.batch_size = 16;
  c.epochs = 4;
  c.dropout_p = 0.5;
  c.grad_clip_norm = 5.0;
  c.optimizer = OptimizerKind::kSgd;
  c.learning_rate = 1.0;
  c.lr_decay = 1.2;
  c.threshold_sweep = {0.0, 0.2, 0.4};
  return c;
}

TaskConfig TaskConfig::desk_mnist() {
  TaskConfig c;
  c.task = TaskKind::kSeqMnist;
  c.d_h = 64;
  c.sequence_length = 28;
  c.batch_size = 32;
  c.epochs = 10;
  c.learning_rate = 0.005;
  c.mnist_row_width = 28;
  c.mnist_train_limit = 1000;
  c.threshold_sweep = {0.0, 0.2, 0.4};
  return c;
}

// ---------------------------------------------------------------------------
// Losses and metrics

double cross_entropy(std::span<const double> logits, int target) {
  if (logits.size() < 2) {
    throw std::invalid_argument("cross_entropy: need at least two classes");
  }
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw std::invalid_argument("cross_entropy: target " +
                                std::to_string(target) + " out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return -(logits[target] - m - std::log(z));
}

double bpc(double mean_loss_nats) { return mean_loss_nats / std::log(2.0); }

double ppw(double mean_loss_nats) { return std::exp(mean_loss_nats); }

double mer(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("mer: prediction and label counts differ");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += predictions[i] == labels[i] ? 1 : 0;
  }
  return 100.0 * (1.0 - static_cast<double>(correct) / labels.size());
}

// ---------------------------------------------------------------------------
// Optimizers

void adam_update(std::span<const ParamSlot> slots, OptimizerState& s,
                 int step) {
  if (step < 1) throw std::invalid_argument("adam_update: step is 1-based");
  if (s.m.size() != slots.size()) {
    s.m.assign(slots.size(), {});
    s.v.assign(slots.size(), {});
  }
  const double c1 = 1.0 - std::pow(s.beta1, step);
  const double c2 = 1.0 - std::pow(s.beta2, step);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const ParamSlot& p = slots[k];
    if (p.value.size() != p.grad.size()) {
      throw std::invalid_argument("adam_update: parameter/gradient size mismatch");
    }
    auto& m = s.m[k];
    auto& v = s.v[k];
    if (m.size() != p.value.size()) {
      m.assign(p.value.size(), 0.0);
      v.assign(p.value.size(), 0.0);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p.value[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  }
}

void sgd_update(std::span<const ParamSlot> slots, double learning_rate) {
  for (const ParamSlot& p : slots) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.value[i] -= learning_rate * p.grad[i];
    }
  }
}

double global_norm(std::span<const std::span<double>> grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_gradients(std::span<const std::span<double>> grads,
                      double max_norm) {
  if (!(max_norm > 0.0)) {
    throw std::invalid_argument("clip_gradients: max_norm must be positive");
  }
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& g : grads) {
      for (double& v : g) v *= scale;
    }
  }
  return norm;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                    std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: p must lie in [0, 1)");
  }
  Matrix mask(rows, cols);
  if (p == 0.0) {
    mask.setOnes();
    return mask;
  }
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      mask(r, c) = keep(rng) ? scale : 0.0;
    }
  }
  return mask;
}

Vector apply_dropout(const Vector& x, double p, std::mt19937_64& rng,
                     bool training) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: p must lie in [0, 1)");
  }
  if (!training || p == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.size(), 1, p, rng).col(0));
}

// ---------------------------------------------------------------------------
// Model

int Model::input_classes() const {
  if (embedding.size() != 0) return static_cast<int>(embedding.cols());
  return lstm.d_x;
}

TaskData TaskData::from_corpus(const TokenCorpus& corpus) {
  TaskData d;
  d.train = corpus.train;
  d.valid = corpus.valid;
  d.test = corpus.test;
  d.vocab_size = corpus.vocab.size();
  return d;
}

TaskData TaskData::from_mnist(const MnistData& mnist) {
  TaskData d;
  d.images_train = mnist.train;
  d.images_test = mnist.test;
  return d;
}

namespace {

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
  }
}

void fill_uniform(Vector& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
}

template <typename Dense>
Dense fake_quantize(const Dense& x, int bits) {
  RealTensor t(std::vector<double>(x.data(), x.data() + x.size()),
               {static_cast<std::size_t>(x.size())});
  const RealTensor back = dequantize(quantize(t, bits));
  Dense out(x.rows(), x.cols());
  std::copy(back.data.begin(), back.data.end(), out.data());
  return out;
}

Model quantized_copy(const Model& m, int bits) {
  Model q;
  q.lstm.d_x = m.lstm.d_x;
  q.lstm.d_h = m.lstm.d_h;
  q.lstm.w_h = fake_quantize(m.lstm.w_h, bits);
  q.lstm.w_x = fake_quantize(m.lstm.w_x, bits);
  q.lstm.b = fake_quantize(m.lstm.b, bits);
  if (m.embedding.size() != 0) q.embedding = fake_quantize(m.embedding, bits);
  q.w_out = fake_quantize(m.w_out, bits);
  q.b_out = fake_quantize(m.b_out, bits);
  return q;
}

int argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index idx = 0;
  v.maxCoeff(&idx);
  return static_cast<int>(idx);
}

/// Softmax cross-entropy over the columns of @p logits. Writes
/// d(sum loss)/d(logits) into @p dlogits and returns the summed loss.
double softmax_xent(const Matrix& logits, std::span<const int> targets,
                    Matrix* dlogits) {
  double total = 0.0;
  if (dlogits) dlogits->resize(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const double m = logits.col(b).maxCoeff();
    const Vector e = (logits.col(b).array() - m).exp().matrix();
    const double z = e.sum();
    const int y = targets[static_cast<std::size_t>(b)];
    total += -(logits(y, b) - m - std::log(z));
    if (dlogits) {
      dlogits->col(b) = e / z;
      (*dlogits)(y, b) -= 1.0;
    }
  }
  return total;
}

struct Workspace {
  const TaskConfig& cfg;
  const Model& qm;  // the model actually used in the forward pass
  std::mt19937_64* dropout_rng = nullptr;  // null: no dropout (evaluation)

  double mnist_scale() const { return 1.0 / 127.0; }

  bool dropping() const { return dropout_rng != nullptr && cfg.dropout_p > 0.0; }
};

struct BatchOutcome {
  double loss_sum = 0.0;
  std::size_t predictions = 0;
  std::size_t correct = 0;
  std::size_t zeros = 0;
  std::size_t state_elements = 0;
};

struct BatchGrads {
  LstmGradients lstm;
  Matrix embedding;
  Matrix w_out;
  Vector b_out;
};

ForwardOptions forward_options(const TaskConfig& cfg, double threshold) {
  ForwardOptions o;
  o.prune.enabled = threshold > 0.0;
  o.prune.threshold = threshold;
  o.quant.enabled = cfg.quantize;
  o.quant.bits = cfg.quant_bits;
  return o;
}

void count_sparsity(const SequenceCache& cache, double threshold,
                    BatchOutcome& out) {
  for (const StepCache& s : cache.steps) {
    const Matrix pruned = prune_state(s.h, threshold);
    out.zeros += static_cast<std::size_t>((pruned.array() == 0.0).count());
    out.state_elements += static_cast<std::size_t>(pruned.size());
  }
}

/// Language-model batch: forward, loss, and (when @p grads) backward with
/// the mean loss over all predictions as the objective.
BatchOutcome lm_batch(const Workspace& ws, const SequenceBatch& batch,
                      BatchState& state, double threshold, BatchGrads* grads) {
  const TaskConfig& cfg = ws.cfg;
  const Model& qm = ws.qm;
  const int lanes = batch.batch;
  const int steps = batch.length;
  const bool word = cfg.task == TaskKind::kWordLm;
  const int d_x = qm.lstm.d_x;

  std::vector<Matrix> inputs(steps);
  std::vector<Matrix> in_masks(word && ws.dropping() ? steps : 0);
  for (int t = 0; t < steps; ++t) {
    Matrix x = Matrix::Zero(d_x, lanes);
    for (int b = 0; b < lanes; ++b) {
      const int id = batch.input(b, t);
      if (word) {
        x.col(b) = qm.embedding.col(id);
      } else {
        x(id, b) = 1.0;
      }
    }
    if (!in_masks.empty()) {
      in_masks[t] = dropout_mask(d_x, lanes, cfg.dropout_p, *ws.dropout_rng);
      x = x.cwiseProduct(in_masks[t]);
    }
    inputs[t] = std::move(x);
  }

  const SequenceCache cache =
      forward_sequence(qm.lstm, inputs, state, forward_options(cfg, threshold));

  BatchOutcome out;
  count_sparsity(cache, threshold, out);

  const double norm = 1.0 / (static_cast<double>(lanes) * steps);
  std::vector<Matrix> dh_ext(steps);
  if (grads) {
    grads->w_out = Matrix::Zero(qm.w_out.rows(), qm.w_out.cols());
    grads->b_out = Vector::Zero(qm.b_out.size());
  }
  std::vector<int> targets(lanes);
  Matrix dlogits;
  for (int t = 0; t < steps; ++t) {
    Matrix h = cache.steps[t].h;
    Matrix out_mask;
    if (ws.dropping()) {
      out_mask = dropout_mask(h.rows(), lanes, cfg.dropout_p, *ws.dropout_rng);
      h = h.cwiseProduct(out_mask);
    }
    Matrix logits = qm.w_out * h;
    logits.colwise() += qm.b_out;
    for (int b = 0; b < lanes; ++b) targets[b] = batch.target(b, t);
    out.loss_sum += softmax_xent(logits, targets, grads ? &dlogits : nullptr);
    out.predictions += lanes;
    for (int b = 0; b < lanes; ++b) {
      out.correct += argmax(logits.col(b)) == targets[b] ? 1 : 0;
    }
    if (grads) {
      dlogits *= norm;
      grads->w_out.noalias() += dlogits * h.transpose();
      grads->b_out += dlogits.rowwise().sum();
      Matrix dh = qm.w_out.transpose() * dlogits;
      if (out_mask.size() != 0) dh = dh.cwiseProduct(out_mask);
      dh_ext[t] = std::move(dh);
    }
  }
  state = cache.final_state;
  if (!grads) return out;

  grads->lstm = backward_sequence(qm.lstm, cache, dh_ext);
  if (word) {
    grads->embedding = Matrix::Zero(qm.embedding.rows(), qm.embedding.cols());
    for (int t = 0; t < steps; ++t) {
      Matrix dx = grads->lstm.x[t];
      if (!in_masks.empty()) dx = dx.cwiseProduct(in_masks[t]);
      for (int b = 0; b < lanes; ++b) {
        grads->embedding.col(batch.input(b, t)) += dx.col(b);
      }
    }
  }
  return out;
}

/// Sequential-MNIST batch over the images listed in @p indices; loss on the
/// final step only.
BatchOutcome mnist_batch(const Workspace& ws, const ImageSet& images,
                         std::span<const int> indices, double threshold,
                         BatchGrads* grads) {
  const TaskConfig& cfg = ws.cfg;
  const Model& qm = ws.qm;
  const int lanes = static_cast<int>(indices.size());
  const int width = cfg.mnist_row_width;
  const int pixels = images.rows * images.cols;
  const int steps = pixels / width;
  const double scale = ws.mnist_scale();

  std::vector<Matrix> inputs(steps, Matrix(width, lanes));
  for (int b = 0; b < lanes; ++b) {
    const auto img = images.image(indices[b]);
    for (int t = 0; t < steps; ++t) {
      for (int k = 0; k < width; ++k) {
        double v = img[static_cast<std::size_t>(t) * width + k] / 255.0;
        if (cfg.quantize) v = std::round(v / scale) * scale;
        inputs[t](k, b) = v;
      }
    }
  }

  const SequenceCache cache = forward_sequence(
      qm.lstm, inputs, BatchState::zeros(qm.lstm.d_h, lanes),
      forward_options(cfg, threshold));

  BatchOutcome out;
  count_sparsity(cache, threshold, out);

  Matrix h = cache.steps.back().h;
  Matrix out_mask;
  if (ws.dropping()) {
    out_mask = dropout_mask(h.rows(), lanes, cfg.dropout_p, *ws.dropout_rng);
    h = h.cwiseProduct(out_mask);
  }
  Matrix logits = qm.w_out * h;
  logits.colwise() += qm.b_out;
  std::vector<int> targets(lanes);
  for (int b = 0; b < lanes; ++b) targets[b] = images.labels[indices[b]];
  Matrix dlogits;
  out.loss_sum = softmax_xent(logits, targets, grads ? &dlogits : nullptr);
  out.predictions = lanes;
  for (int b = 0; b < lanes; ++b) {
    out.correct += argmax(logits.col(b)) == targets[b] ? 1 : 0;
  }
  if (!grads) return out;

  dlogits /= static_cast<double>(lanes);
  grads->w_out = dlogits * h.transpose();
  grads->b_out = dlogits.rowwise().sum();
  std::vector<Matrix> dh_ext(steps);
  Matrix dh = qm.w_out.transpose() * dlogits;
  if (out_mask.size() != 0) dh = dh.cwiseProduct(out_mask);
  dh_ext.back() = std::move(dh);
  grads->lstm = backward_sequence(qm.lstm, cache, dh_ext);
  return out;
}

std::vector<ParamSlot> param_slots(Model& m, BatchGrads& g) {
  auto slot = [](auto& value, auto& grad) {
    return ParamSlot{std::span<double>(value.data(), static_cast<std::size_t>(value.size())),
                     std::span<const double>(grad.data(), static_cast<std::size_t>(grad.size()))};
  };
  std::vector<ParamSlot> slots = {
      slot(m.lstm.w_h, g.lstm.w_h), slot(m.lstm.w_x, g.lstm.w_x),
      slot(m.lstm.b, g.lstm.b),     slot(m.w_out, g.w_out),
      slot(m.b_out, g.b_out)};
  if (m.embedding.size() != 0) slots.push_back(slot(m.embedding, g.embedding));
  return slots;
}

std::vector<std::span<double>> grad_spans(BatchGrads& g) {
  auto span = [](auto& x) {
    return std::span<double>(x.data(), static_cast<std::size_t>(x.size()));
  };
  std::vector<std::span<double>> out = {span(g.lstm.w_h), span(g.lstm.w_x),
                                        span(g.lstm.b), span(g.w_out),
                                        span(g.b_out)};
  if (g.embedding.size() != 0) out.push_back(span(g.embedding));
  return out;
}

double metric_from(MetricKind kind, double mean_loss, std::size_t correct,
                   std::size_t predictions) {
  switch (kind) {
    case MetricKind::kBpc: return bpc(mean_loss);
    case MetricKind::kPpw: return ppw(mean_loss);
    case MetricKind::kMer:
      return predictions == 0
                 ? 0.0
                 : 100.0 * (1.0 - static_cast<double>(correct) / predictions);
  }
  return 0.0;
}

int image_count(const ImageSet& set, int limit) {
  return limit > 0 ? std::min(limit, set.count()) : set.count();
}

void require_data(const TaskConfig& cfg, const TaskData& data) {
  if (cfg.task == TaskKind::kSeqMnist) {
    if (data.images_train.count() == 0 || data.images_test.count() == 0) {
      throw std::invalid_argument("seq_mnist: no images loaded");
    }
    if (data.images_train.rows * data.images_train.cols % cfg.mnist_row_width != 0) {
      throw std::invalid_argument("seq_mnist: row width does not divide the image");
    }
  } else if (data.vocab_size < 2 || data.train.empty() || data.valid.empty()) {
    throw std::invalid_argument(std::string(to_string(cfg.task)) +
                                ": token streams not loaded");
  }
}

}  // namespace

Model init_model(const TaskConfig& cfg, const TaskData& data,
                 std::mt19937_64& rng) {
  int d_x = 0;
  int classes = 0;
  switch (cfg.task) {
    case TaskKind::kCharLm:
      d_x = data.vocab_size;
      classes = data.vocab_size;
      break;
    case TaskKind::kWordLm:
      d_x = *cfg.embedding_dim;
      classes = data.vocab_size;
      break;
    case TaskKind::kSeqMnist:
      d_x = cfg.mnist_row_width;
      classes = 10;
      break;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));
  Model m;
  m.lstm = LstmParams::zeros(d_x, cfg.d_h);
  fill_uniform(m.lstm.w_h, bound, rng);
  fill_uniform(m.lstm.w_x, bound, rng);
  fill_uniform(m.lstm.b, bound, rng);
  if (cfg.task == TaskKind::kWordLm) {
    m.embedding.resize(*cfg.embedding_dim, data.vocab_size);
    fill_uniform(m.embedding, bound, rng);
  }
  m.w_out.resize(classes, cfg.d_h);
  fill_uniform(m.w_out, bound, rng);
  m.b_out = Vector(classes);
  fill_uniform(m.b_out, bound, rng);
  return m;
}

EvalResult evaluate(const Model& model, const TaskConfig& cfg,
                    const TaskData& data, double threshold, bool use_test) {
  const Model qm = cfg.quantize ? quantized_copy(model, cfg.quant_bits) : model;
  const Workspace ws{cfg, qm, nullptr};
  BatchOutcome total;

  auto accumulate = [&](const BatchOutcome& o) {
    total.loss_sum += o.loss_sum;
    total.predictions += o.predictions;
    total.correct += o.correct;
    total.zeros += o.zeros;
    total.state_elements += o.state_elements;
  };

  if (cfg.task == TaskKind::kSeqMnist) {
    const ImageSet& set = use_test ? data.images_test : data.images_train;
    const int n = use_test ? image_count(set, cfg.mnist_test_limit)
                           : image_count(set, cfg.mnist_train_limit);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      if (cfg.max_eval_batches > 0 && batches++ >= cfg.max_eval_batches) break;
      const int count = std::min(cfg.batch_size, n - start);
      accumulate(mnist_batch(ws, set, std::span<const int>(idx).subspan(start, count),
                             threshold, nullptr));
    }
  } else {
    const std::vector<int>& stream = use_test ? data.test : data.valid;
    int lanes = cfg.batch_size;
    while (lanes > 1 &&
           stream.size() < static_cast<std::size_t>(lanes) * cfg.sequence_length + 1) {
      lanes /= 2;
    }
    const auto batches = batch_stream(stream, lanes, cfg.sequence_length);
    BatchState state = BatchState::zeros(qm.lstm.d_h, lanes);
    int used = 0;
    for (const SequenceBatch& sb : batches) {
      if (cfg.max_eval_batches > 0 && used++ >= cfg.max_eval_batches) break;
      accumulate(lm_batch(ws, sb, state, threshold, nullptr));
    }
  }

  EvalResult r;
  r.mean_loss = total.predictions ? total.loss_sum / total.predictions : 0.0;
  r.metric = metric_from(cfg.metric(), r.mean_loss, total.correct, total.predictions);
  r.sparsity = total.state_elements
                   ? 100.0 * static_cast<double>(total.zeros) / total.state_elements
                   : 0.0;
  return r;
}

std::vector<Matrix> consumed_states(const Model& model, const TaskConfig& cfg,
                                    const TaskData& data, double threshold, int lanes,
                                    int steps, bool use_test) {
  if (lanes < 1 || steps < 1) throw std::invalid_argument("consumed_states: lanes and steps must be >= 1");
  const Model qm = cfg.quantize ? quantized_copy(model, cfg.quant_bits) : model;
  const ForwardOptions opts = forward_options(cfg, threshold);
  std::vector<Matrix> out;
  auto collect = [&](const SequenceCache& cache) {
    for (std::size_t t = 1; t < cache.steps.size() && static_cast<int>(out.size()) < steps; ++t) {
      out.push_back(cache.steps[t].consumed);
    }
  };

  if (cfg.task == TaskKind::kSeqMnist) {
    const ImageSet& set = use_test ? data.images_test : data.images_train;
    const int n = image_count(set, use_test ? cfg.mnist_test_limit : cfg.mnist_train_limit);
    if (n < lanes) {
      throw std::invalid_argument("consumed_states: " + std::to_string(lanes) +
                                  " lanes but only " + std::to_string(n) + " images");
    }
    const int width = cfg.mnist_row_width;
    const int per_image = set.rows * set.cols / width;
    const double scale = 1.0 / static_cast<double>((1 << (cfg.quant_bits - 1)) - 1);
    for (int start = 0; start + lanes <= n && static_cast<int>(out.size()) < steps;
         start += lanes) {
      std::vector<Matrix> inputs(per_image, Matrix(width, lanes));
      for (int b = 0; b < lanes; ++b) {
        const auto img = set.image(start + b);
        for (int t = 0; t < per_image; ++t) {
          for (int k = 0; k < width; ++k) {
            double v = img[static_cast<std::size_t>(t) * width + k] / 255.0;
            if (cfg.quantize) v = std::round(v / scale) * scale;
            inputs[t](k, b) = v;
          }
        }
      }
      collect(forward_sequence(qm.lstm, inputs, BatchState::zeros(qm.lstm.d_h, lanes), opts));
    }
    return out;
  }

  const std::vector<int>& stream = use_test ? data.test : data.valid;
  const int length = std::min<long long>(steps + 1, (static_cast<long long>(stream.size()) - 1) / lanes);
  if (length < 2) {
    throw std::invalid_argument("consumed_states: stream of " + std::to_string(stream.size()) +
                                " tokens is too short for " + std::to_string(lanes) + " lanes");
  }
  const SequenceBatch sb = batch_stream(stream, lanes, length).front();
  const bool word = cfg.task == TaskKind::kWordLm;
  std::vector<Matrix> inputs(length);
  for (int t = 0; t < length; ++t) {
    Matrix x = Matrix::Zero(qm.lstm.d_x, lanes);
    for (int b = 0; b < lanes; ++b) {
      const int id = sb.input(b, t);
      if (word) {
        x.col(b) = qm.embedding.col(id);
      } else {
        x(id, b) = 1.0;
      }
    }
    inputs[t] = std::move(x);
  }
  collect(forward_sequence(qm.lstm, inputs, BatchState::zeros(qm.lstm.d_h, lanes), opts));
  return out;
}

TrainResult train_task(const TaskConfig& cfg, const TaskData& data,
                       std::uint64_t seed, const EpochCallback& on_epoch) {
  cfg.validate();
  require_data(cfg, data);

  std::mt19937_64 init_rng(seed);
  std::mt19937_64 dropout_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 shuffle_rng(seed ^ 0xc2b2ae3d27d4eb4fULL);

  TrainResult result;
  result.model = init_model(cfg, data, init_rng);
  Model& model = result.model;

  OptimizerState opt;
  opt.kind = cfg.optimizer;
  opt.learning_rate = cfg.learning_rate;
  opt.decay_factor = cfg.lr_decay;
  double best_metric = std::numeric_limits<double>::infinity();
  int step = 0;

  std::vector<SequenceBatch> lm_batches;
  if (cfg.task != TaskKind::kSeqMnist) {
    lm_batches = batch_stream(data.train, cfg.batch_size, cfg.sequence_length);
  }
  const int n_images =
      cfg.task == TaskKind::kSeqMnist ? image_count(data.images_train, cfg.mnist_train_limit) : 0;
  std::vector<int> order(n_images);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t predictions = 0;
    BatchState state = BatchState::zeros(cfg.d_h, cfg.batch_size);

    auto train_on = [&](auto&& run_batch) {
      const Model qm = cfg.quantize ? quantized_copy(model, cfg.quant_bits) : model;
      const Workspace ws{cfg, qm, &dropout_rng};
      BatchGrads grads;
      const BatchOutcome o = run_batch(ws, grads);
      const double mean = o.loss_sum / static_cast<double>(o.predictions);
      if (!std::isfinite(mean)) {
        throw TrainingDiverged("non-finite training loss at epoch " +
                                   std::to_string(epoch) + ", step " +
                                   std::to_string(step + 1),
                               result.log);
      }
      loss_sum += o.loss_sum;
      predictions += o.predictions;
      result.batch_losses.push_back(mean);

      if (cfg.grad_clip_norm) clip_gradients(grad_spans(grads), *cfg.grad_clip_norm);
      const auto slots = param_slots(model, grads);
      ++step;
      if (cfg.optimizer == OptimizerKind::kAdam) {
        adam_update(slots, opt, step);
      } else {
        sgd_update(slots, opt.learning_rate);
      }
      for (const auto& slot : slots) {
        for (double v : slot.value) {
          if (!std::isfinite(v)) {
            throw TrainingDiverged("non-finite weights after epoch " + std::to_string(epoch) +
                                       ", step " + std::to_string(step),
                                   result.log);
          }
        }
      }
    };

    int batches = 0;
    if (cfg.task == TaskKind::kSeqMnist) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (int start = 0; start + cfg.batch_size <= n_images; start += cfg.batch_size) {
        if (cfg.max_train_batches > 0 && batches++ >= cfg.max_train_batches) break;
        const auto idx = std::span<const int>(order).subspan(start, cfg.batch_size);
        train_on([&](const Workspace& ws, BatchGrads& g) {
          return mnist_batch(ws, data.images_train, idx, cfg.threshold, &g);
        });
      }
    } else {
      for (const SequenceBatch& sb : lm_batches) {
        if (cfg.max_train_batches > 0 && batches++ >= cfg.max_train_batches) break;
        if (sb.reset_state) state = BatchState::zeros(cfg.d_h, cfg.batch_size);
        train_on([&](const Workspace& ws, BatchGrads& g) {
          return lm_batch(ws, sb, state, cfg.threshold, &g);
        });
      }
    }

    const EvalResult eval = evaluate(model, cfg, data, cfg.threshold,
                                     cfg.task == TaskKind::kSeqMnist);
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = predictions ? loss_sum / predictions : 0.0;
    entry.metric = eval.metric;
    entry.sparsity = eval.sparsity;
    result.log.push_back(entry);
    result.final_eval = eval;
    if (on_epoch) on_epoch(entry);

    if (cfg.lr_decay > 1.0 &&
        !(eval.metric < best_metric)) {
      opt.learning_rate /= cfg.lr_decay;
    }
    best_metric = std::min(best_metric, eval.metric);
  }
  return result;
}

SweepResult sparsity_sweep(const TaskConfig& config, const TaskData& data,
                           const std::vector<double>& thresholds,
                           std::uint64_t seed) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("sparsity_sweep: thresholds must be ascending");
  }
  SweepResult sweep;
  std::optional<double> dense;
  for (double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    row.metric_kind = config.metric();
    try {
      TaskConfig cfg = config;
      cfg.threshold = t;
      const TrainResult r = train_task(cfg, data, seed);
      row.metric = r.final_eval.metric;
      row.sparsity = r.final_eval.sparsity;
      if (t == 0.0 && !dense) dense = row.metric;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    sweep.rows.push_back(std::move(row));
  }
  if (!dense) {
    TaskConfig cfg = config;
    cfg.threshold = 0.0;
    dense = train_task(cfg, data, seed).final_eval.metric;
  }
  sweep.dense_metric = *dense;

  std::stable_sort(sweep.rows.begin(), sweep.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return a.sparsity < b.sparsity;
                   });
  const double limit = sweep.dense_metric * (1.0 + config.sweet_spot_tolerance);
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    const SweepRow& r = sweep.rows[i];
    if (r.error.empty() && r.metric <= limit) sweep.sweet_spot = i;
  }
  if (sweep.sweet_spot) sweep.rows[*sweep.sweet_spot].sweet_spot = true;
  return sweep;
}

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,loss,metric,sparsity\n";
  char buf[160];
  for (const EpochLog& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.4f\n", e.epoch, e.loss,
                  e.metric, e.sparsity);
    os << buf;
  }
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
  os << "threshold,sparsity_pct,metric,metric_kind,sweet_spot,error\n";
  char buf[200];
  for (const SweepRow& r : sweep.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.4f,%.6f,%s,%d,", r.threshold,
                  r.sparsity, r.metric, to_string(r.metric_kind),
                  r.sweet_spot ? 1 : 0);
    os << buf;
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << err << '\n';
  }
}

}  // namespace zss
