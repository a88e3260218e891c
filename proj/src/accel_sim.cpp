// SPDX-License-Identifier: Apache-2.0
#include "zss/accel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace zss {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t positions_active(const SparseStateVector& sv, ExecutionMode mode) {
  return mode == ExecutionMode::kDense
             ? sv.original_length
             : static_cast<std::int64_t>(sv.compute_group_count());
}

void finish_timing(SimReport& r, const AcceleratorConfig& cfg) {
  r.time_s = static_cast<double>(r.cycles) / cfg.frequency_hz;
  r.gops = r.cycles > 0 ? static_cast<double>(r.ops_nominal) / r.time_s / 1e9
                        : 0.0;
  r.mac_utilization =
      r.matvec_cycles > 0
          ? static_cast<double>(r.macs) /
                (static_cast<double>(cfg.total_pes()) * r.matvec_cycles)
          : 0.0;
}

// Accumulator initialization does not depend on h_{t-1}: the bias (dense
// input) or the per-lane one-hot column with the bias folded in is streamed
// into the scratch memory over the bus bits the product leaves free. Only
// the part that outlasts the product costs cycles. Without spare bits it
// goes through the weight path at one block per cycle instead.
std::int64_t exposed_init_cycles(const AcceleratorConfig& cfg,
                                 const WorkloadSpec& w,
                                 std::int64_t product_cycles) {
  const std::int64_t rows = 4LL * w.d_h;
  const std::int64_t columns =
      w.input_mode == InputMode::kOneHotLookup ? w.batch : 1;
  const std::int64_t spare =
      cfg.bits_per_cycle() -
      static_cast<std::int64_t>(cfg.weights_per_cycle) * cfg.weight_bits -
      static_cast<std::int64_t>(cfg.inputs_per_cycle) * cfg.activation_bits;
  if (spare <= 0) return columns * ceil_div(rows, cfg.weights_per_cycle);
  const std::int64_t stream = ceil_div(columns * rows * cfg.weight_bits, spare);
  return std::max<std::int64_t>(0, stream - product_cycles);
}

}  // namespace

std::int64_t AcceleratorConfig::bits_per_cycle() const {
  return static_cast<std::int64_t>(std::floor(offchip_bandwidth_bps / frequency_hz));
}

void AcceleratorConfig::validate() const {
  std::ostringstream err;
  if (tiles < 1) err << "tiles must be >= 1; ";
  if (pes_per_tile < 1) err << "pes_per_tile must be >= 1; ";
  if (weights_per_cycle < 1) err << "weights_per_cycle must be >= 1; ";
  if (inputs_per_cycle < 1) err << "inputs_per_cycle must be >= 1; ";
  if (scratch_depth < 1) err << "scratch_depth must be >= 1; ";
  if (scratch_width_bits < 1) err << "scratch_width_bits must be >= 1; ";
  if (weight_bits < 1 || activation_bits < 1) err << "bit widths must be >= 1; ";
  if (!(frequency_hz > 0.0)) err << "frequency_hz must be positive; ";
  if (!(offchip_bandwidth_bps > 0.0)) err << "offchip_bandwidth_bps must be positive; ";
  if (!(peak_gops_per_watt > 0.0)) err << "peak_gops_per_watt must be positive; ";
  if (err.tellp() == 0) {
    if (total_pes() % weights_per_cycle != 0) {
      err << "tiles*pes_per_tile (" << total_pes()
          << ") must be a multiple of weights_per_cycle (" << weights_per_cycle
          << "); ";
    } else if (weights_per_cycle > total_pes()) {
      err << "weights_per_cycle exceeds the PE count; ";
    }
    const std::int64_t need = static_cast<std::int64_t>(weights_per_cycle) * weight_bits +
                              static_cast<std::int64_t>(inputs_per_cycle) * activation_bits;
    if (need > bits_per_cycle()) {
      err << "per-cycle traffic of " << need << " bits exceeds the "
          << bits_per_cycle() << " bits the off-chip bandwidth supplies; ";
    }
  }
  const std::string msg = err.str();
  if (!msg.empty()) {
    throw std::invalid_argument("accelerator config: " + msg.substr(0, msg.size() - 2));
  }
}

void AcceleratorConfig::validate_batch(int lanes) const {
  if (lanes < 1) throw std::invalid_argument("batch size must be >= 1");
  if (lanes > scratch_depth) {
    throw std::invalid_argument("batch size " + std::to_string(lanes) +
                                " exceeds scratch depth " +
                                std::to_string(scratch_depth));
  }
}

const char* to_string(InputMode mode) {
  return mode == InputMode::kOneHotLookup ? "one_hot_lookup" : "dense_vector";
}

const char* to_string(ExecutionMode mode) {
  return mode == ExecutionMode::kDense ? "dense" : "sparse";
}

SimReport& SimReport::operator+=(const SimReport& o) {
  cycles += o.cycles;
  ops_nominal += o.ops_nominal;
  ops_executed += o.ops_executed;
  skipped_positions += o.skipped_positions;
  matvec_cycles += o.matvec_cycles;
  input_cycles += o.input_cycles;
  elementwise_cycles += o.elementwise_cycles;
  macs += o.macs;
  steps += o.steps;
  return *this;
}

std::int64_t matvec_cycles(const AcceleratorConfig& cfg, std::int64_t rows,
                           std::int64_t positions, int lanes) {
  if (rows <= 0 || positions <= 0) return 0;
  const std::int64_t groups = cfg.pipeline_depth();
  const std::int64_t blocks = ceil_div(rows, cfg.weights_per_cycle);
  const std::int64_t items = positions * blocks;
  const std::int64_t b = lanes;

  // Longest chain of the fetch recurrence from a position's first item to
  // the last item: +1 steps cost one cycle, +G steps cost B cycles.
  auto path = [&](std::int64_t d) {
    return b >= groups ? (d / groups) * b + d % groups : d;
  };
  std::int64_t last_fetch = 0;
  for (std::int64_t i = 0; i < positions; ++i) {
    const std::int64_t start = (i * b) / cfg.inputs_per_cycle;
    last_fetch = std::max(last_fetch, start + path(items - 1 - i * blocks));
  }
  return last_fetch + b;
}

SimReport simulate_matvec(const AcceleratorConfig& cfg, int rows,
                          const SparseStateVector& state, ExecutionMode mode) {
  cfg.validate();
  cfg.validate_batch(state.lanes);
  if (rows < 0) throw std::invalid_argument("simulate_matvec: negative rows");

  SimReport r;
  r.steps = 1;
  r.lanes = state.lanes;
  r.mode = mode;
  const std::int64_t active = positions_active(state, mode);
  r.skipped_positions = state.original_length - active;
  r.matvec_cycles = matvec_cycles(cfg, rows, active, state.lanes);
  r.cycles = r.matvec_cycles;
  r.macs = static_cast<std::int64_t>(rows) * active * state.lanes;
  r.ops_nominal = 2LL * rows * state.original_length * state.lanes;
  r.ops_executed = 2 * r.macs;
  finish_timing(r, cfg);
  return r;
}

SimReport simulate_matvec(const AcceleratorConfig& cfg, int rows,
                          const BatchedState& state, ExecutionMode mode) {
  return simulate_matvec(cfg, rows, encode(state), mode);
}

std::int64_t count_nominal_ops(int d_x, int d_h, InputMode mode) {
  const std::int64_t h = d_h;
  const std::int64_t recurrent = 2 * h * 4 * h;
  return recurrent + count_fixed_ops(d_x, d_h, mode);
}

std::int64_t count_fixed_ops(int d_x, int d_h, InputMode mode) {
  const std::int64_t h = d_h;
  const std::int64_t input = mode == InputMode::kOneHotLookup
                                 ? 4 * h
                                 : 2 * static_cast<std::int64_t>(d_x) * 4 * h;
  // bias (4h), cell update (3h), output (h)
  return input + 4 * h + 3 * h + h;
}

std::int64_t count_nominal_ops(const WorkloadSpec& w) {
  return count_nominal_ops(w.d_x, w.d_h, w.input_mode);
}

SimReport simulate_lstm_step(const AcceleratorConfig& cfg,
                             const WorkloadSpec& w, std::size_t step,
                             ExecutionMode mode) {
  cfg.validate();
  cfg.validate_batch(w.batch);
  if (w.d_h < 1) throw std::invalid_argument("simulate: d_h must be >= 1");
  if (w.d_x < 0) throw std::invalid_argument("simulate: d_x must be >= 0");

  std::int64_t active_h = w.d_h;
  if (!w.trace.empty()) {
    if (step >= w.trace.size()) {
      throw std::out_of_range("simulate: step " + std::to_string(step) +
                              " beyond trace length");
    }
    const SparseStateVector& sv = w.trace[step];
    if (sv.original_length != w.d_h || sv.lanes != w.batch) {
      throw std::invalid_argument("simulate: trace step " +
                                  std::to_string(step) +
                                  " does not match workload d_h/batch");
    }
    active_h = positions_active(sv, mode);
  }

  const std::int64_t lanes = w.batch;
  const std::int64_t rows = 4LL * w.d_h;
  const bool dense_input = w.input_mode == InputMode::kDenseVector;

  SimReport r;
  r.steps = 1;
  r.lanes = w.batch;
  r.mode = mode;
  r.skipped_positions = w.d_h - active_h;

  const std::int64_t positions = active_h + (dense_input ? w.d_x : 0);
  r.matvec_cycles = matvec_cycles(cfg, rows, positions, w.batch);
  r.macs = rows * positions * lanes;
  r.input_cycles = exposed_init_cycles(cfg, w, r.matvec_cycles);

  if (w.include_elementwise) {
    const std::int64_t per_lane = ceil_div(w.d_h, cfg.pes_per_tile);
    const std::int64_t c_read =
        ceil_div(lanes * w.d_h * cfg.activation_bits, cfg.bits_per_cycle());
    const std::int64_t phase1 = std::max(lanes * per_lane, c_read);
    const std::int64_t phase2 = lanes * per_lane;
    const std::int64_t phase3 = lanes * per_lane;
    r.elementwise_cycles = phase1 + phase2 + phase3 + 2;
  }
  r.cycles = r.matvec_cycles + r.input_cycles + r.elementwise_cycles;

  r.ops_nominal = lanes * count_nominal_ops(w);
  r.ops_executed = r.ops_nominal - lanes * 2 * rows * r.skipped_positions;
  finish_timing(r, cfg);
  return r;
}

SimReport simulate_workload(const AcceleratorConfig& cfg,
                            const WorkloadSpec& w, ExecutionMode mode) {
  const std::size_t steps = std::max<std::size_t>(1, w.trace.size());
  SimReport total;
  total.lanes = w.batch;
  total.mode = mode;
  for (std::size_t s = 0; s < steps; ++s) {
    total += simulate_lstm_step(cfg, w, s, mode);
  }
  finish_timing(total, cfg);
  return total;
}

double analytic_speedup(const WorkloadSpec& w, double s_eff) {
  if (s_eff < 0.0 || s_eff > 1.0) {
    throw std::invalid_argument("analytic_speedup: sparsity must lie in [0, 1]");
  }
  const double total = static_cast<double>(count_nominal_ops(w));
  if (total == 0.0) return 1.0;
  const double fixed = static_cast<double>(count_fixed_ops(w.d_x, w.d_h, w.input_mode));
  const double skippable = total - fixed;
  return total / (fixed + (1.0 - s_eff) * skippable);
}

SimReport energy_report(SimReport report, const AcceleratorConfig& cfg) {
  report.power_w = cfg.peak_gops() / cfg.peak_gops_per_watt;
  report.gops_per_watt = report.gops / report.power_w;
  return report;
}

std::vector<std::vector<std::int64_t>> sparse_preactivation_accumulators(
    const QuantizedTensor& w_h, const SparseStateVector& state, double scale) {
  if (w_h.shape.size() != 2 ||
      w_h.shape[1] != static_cast<std::size_t>(state.original_length)) {
    throw std::invalid_argument(
        "sparse_preactivation_accumulators: weight columns must equal d_h");
  }
  if (!(scale > 0.0)) {
    throw std::invalid_argument("sparse_preactivation_accumulators: bad scale");
  }
  const std::size_t rows = w_h.shape[0];
  const std::size_t cols = w_h.shape[1];
  std::vector<std::vector<std::int64_t>> acc(
      state.lanes, std::vector<std::int64_t>(rows, 0));

  // Walk the offset stream exactly as the weight fetcher does.
  long pos = -1;
  for (std::size_t g = 0; g < state.group_count(); ++g) {
    pos += static_cast<long>(state.offsets[g]) + 1;
    if (state.is_escape(g)) continue;
    for (int b = 0; b < state.lanes; ++b) {
      const double v = state.group_values[g * state.lanes + b] / scale;
      const auto q = static_cast<std::int64_t>(std::clamp(std::round(v), -128.0, 127.0));
      if (q == 0) continue;
      for (std::size_t r = 0; r < rows; ++r) {
        acc[b][r] += static_cast<std::int64_t>(w_h.data[r * cols + pos]) * q;
      }
    }
  }
  return acc;
}

}  // namespace zss
