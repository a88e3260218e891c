// SPDX-License-Identifier: Apache-2.0
/**
 * @file   accel_sim.hpp
 * @brief  Cycle-level model of the zero-state-skipping LSTM accelerator.
 *
 * Dataflow of the recurrent product (rows = 4*d_h):
 *  - The PE array (tiles * pes_per_tile PEs) is split into G = PEs /
 *    weights_per_cycle groups; G is the pipeline depth.
 *  - Rows are cut into blocks of weights_per_cycle rows. For every active
 *    input position the matrix column is fetched block by block, one block
 *    per cycle. A work item (position, block) goes to group item % G.
 *  - The fetched block stays in the group's weight register while the
 *    group runs one MAC per cycle for each of the B batch lanes, so a group
 *    is busy for B cycles per item.
 *  - Lane inputs stream in at inputs_per_cycle elements per cycle in
 *    (position, lane) order; lane b of an item must have its input by the
 *    cycle it executes.
 *
 * Writing F_k for the fetch cycle of item k and i(k) for its position index:
 *
 *   F_k = max(F_{k-1} + 1, F_{k-G} + B, floor(i(k) * B / inputs_per_cycle))
 *
 * and the product finishes at F_{K-1} + B. Skipped positions generate no
 * items at all: the offset stream addresses the weight columns directly.
 *
 * Around the product, a time step adds the input term and the Hadamard
 * schedule. A dense input x_t contributes d_x more positions to the same
 * item stream. The accumulators start from the bias, or for one-hot inputs
 * from the looked-up W_x column with the bias folded in; that data does not
 * depend on h_{t-1} and streams into the scratch over the bus bits the
 * product leaves free, so only the part outlasting the product is exposed.
 * The Hadamard schedule is f*c_{t-1} (tile 1) concurrently with i*g (tile 2), then add and
 * tanh (tile 4), then o*tanh(c) (tile 3), then the encoder. Each phase costs
 * B * ceil(d_h / pes_per_tile) cycles; the first phase is also bounded by
 * reading c_{t-1} for every lane. Gate activations and the encoder are
 * pipelined with one cycle of drain each.
 */
#pragma once

#include "zss/numerics.hpp"
#include "zss/sparse_state.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace zss {

struct AcceleratorConfig {
  int tiles = 4;
  int pes_per_tile = 48;
  double frequency_hz = 200e6;
  int weights_per_cycle = 24;
  int inputs_per_cycle = 1;
  int scratch_depth = 16;
  int scratch_width_bits = 12;
  int weight_bits = 8;
  int activation_bits = 8;
  double offchip_bandwidth_bps = 51.2e9;
  /// Efficiency at the dense peak; sets the constant power draw.
  double peak_gops_per_watt = 925.3;

  int total_pes() const { return tiles * pes_per_tile; }
  int pipeline_depth() const { return total_pes() / weights_per_cycle; }
  std::int64_t bits_per_cycle() const;
  double peak_gops() const { return 2.0 * total_pes() * frequency_hz / 1e9; }

  /// Throws std::invalid_argument listing every violated constraint.
  void validate() const;
  /// Throws std::invalid_argument if @p lanes exceeds the scratch depth.
  void validate_batch(int lanes) const;
};

enum class InputMode { kOneHotLookup, kDenseVector };
enum class ExecutionMode { kDense, kSparse };

const char* to_string(InputMode mode);
const char* to_string(ExecutionMode mode);

struct WorkloadSpec {
  int d_x = 0;
  int d_h = 0;
  InputMode input_mode = InputMode::kOneHotLookup;
  int batch = 1;
  /// One encoded state per time step (the h^p each step consumes). An
  /// empty trace is simulated as a single fully dense step.
  std::vector<SparseStateVector> trace;
  bool include_elementwise = true;
};

struct SimReport {
  std::int64_t cycles = 0;
  std::int64_t ops_nominal = 0;
  std::int64_t ops_executed = 0;
  std::int64_t skipped_positions = 0;
  double time_s = 0.0;
  double gops = 0.0;
  double gops_per_watt = 0.0;
  double power_w = 0.0;

  int steps = 0;
  int lanes = 1;
  ExecutionMode mode = ExecutionMode::kSparse;
  std::int64_t matvec_cycles = 0;
  std::int64_t input_cycles = 0;
  std::int64_t elementwise_cycles = 0;
  std::int64_t macs = 0;
  /// macs / (PEs * matvec_cycles)
  double mac_utilization = 0.0;

  SimReport& operator+=(const SimReport& other);
};

/// Closed-form cycle count of one recurrent product with @p positions
/// active input positions.
std::int64_t matvec_cycles(const AcceleratorConfig& cfg, std::int64_t rows,
                           std::int64_t positions, int lanes);

SimReport simulate_matvec(const AcceleratorConfig& cfg, int rows,
                          const BatchedState& state,
                          ExecutionMode mode = ExecutionMode::kSparse);
SimReport simulate_matvec(const AcceleratorConfig& cfg, int rows,
                          const SparseStateVector& state,
                          ExecutionMode mode = ExecutionMode::kSparse);

/// Dense-equivalent operations of one step for one lane.
std::int64_t count_nominal_ops(int d_x, int d_h, InputMode mode);
std::int64_t count_nominal_ops(const WorkloadSpec& workload);

/// Non-skippable portion of count_nominal_ops (everything except the
/// recurrent product).
std::int64_t count_fixed_ops(int d_x, int d_h, InputMode mode);

/// Simulates step @p step of the workload trace (ignored if the trace is
/// empty).
SimReport simulate_lstm_step(const AcceleratorConfig& cfg,
                             const WorkloadSpec& workload, std::size_t step,
                             ExecutionMode mode);

/// Sum over all steps of the trace.
SimReport simulate_workload(const AcceleratorConfig& cfg,
                            const WorkloadSpec& workload, ExecutionMode mode);

/// Closed-form speedup: total / (fixed + (1 - s) * skippable).
double analytic_speedup(const WorkloadSpec& workload, double s_eff);

/// Constant-power model: power = peak_gops / peak_gops_per_watt.
SimReport energy_report(SimReport report, const AcceleratorConfig& cfg);

/// Gate pre-activation accumulators computed along the accelerator's item
/// order using only the positions present in the offset stream. Lane
/// values are quantized with @p scale. Result is lane-major [B][rows].
std::vector<std::vector<std::int64_t>> sparse_preactivation_accumulators(
    const QuantizedTensor& w_h, const SparseStateVector& state, double scale);

}  // namespace zss
