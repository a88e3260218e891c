// SPDX-License-Identifier: Apache-2.0
/**
 * @file   harness.hpp
 * @brief  Subcommands behind the `zss` executable.
 *
 * Every command writes its results below an output directory and returns a
 * process exit code: 0 on success, 1 when the configuration or request is
 * invalid, 2 when a run fails (missing or malformed data, divergence, I/O).
 * Outputs contain no timestamps, so repeated runs with the same seed are
 * byte-identical.
 */
#pragma once

#include "zss/accel_sim.hpp"
#include "zss/config.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

namespace zss::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kRuntimeFailure = 2 };

/// Reference operating point per task and batch size: the measured hidden
/// state sparsity of the sweet-spot model and the throughput and efficiency
/// reported for it.
struct ReferenceCell {
  TaskKind task;
  int batch;
  double sparsity_pct;
  double sparse_gops;
  double dense_gops;
  double sparse_gops_per_watt;
  double dense_gops_per_watt;
};

const std::vector<ReferenceCell>& reference_cells();
const ReferenceCell* find_reference(TaskKind task, int batch);

/// Full-size workload dimensions of each task (char: one-hot over 50
/// symbols into d_h = 1000; word: 300-d embeddings, d_h = 300; MNIST: one
/// pixel per step, d_h = 100).
WorkloadSpec reference_workload(TaskKind task, int batch);

/// Exactly round(s * d_h) positions zero in every lane; every other position
/// holds nonzero int8-grid values in all lanes. Position choice uses @p rng.
SparseStateVector synthetic_state(int d_h, int lanes, double sparsity, std::mt19937_64& rng);

/// Short task tag used in file names: char, word, mnist.
const char* task_tag(TaskKind task);

/// Runs @p body and maps exceptions to exit codes, printing the message on
/// @p err.
int guarded(const std::function<int()>& body, std::ostream& err);

int cmd_train(const ExperimentManifest& manifest, std::ostream& out, std::ostream& err);
int cmd_sweep(const ExperimentManifest& manifest, std::ostream& out, std::ostream& err);

struct TraceRequest {
  std::vector<int> batches;  // empty: manifest batch sizes
  std::optional<std::filesystem::path> checkpoint;
  std::optional<int> steps;
};
int cmd_trace(const ExperimentManifest& manifest, const TraceRequest& request, std::ostream& out,
              std::ostream& err);

struct SimulateRequest {
  std::filesystem::path out_dir = "out/sim";
  AcceleratorConfig accelerator;
  std::uint64_t seed = 1;
  /// Trace-driven run. Workload input size comes from task/d_x.
  std::optional<std::filesystem::path> trace;
  std::optional<TaskKind> task;
  std::optional<int> d_x;
  /// Synthetic run at this sparsity (fraction); default: the reference
  /// sparsity of the task and batch size.
  std::optional<double> sparsity;
  std::vector<int> batches;  // empty: 1, 8, 16
  std::vector<ExecutionMode> modes = {ExecutionMode::kDense, ExecutionMode::kSparse};
  int steps = 1;
  /// All tasks x batches x modes at reference sparsity, plus throughput_grid.csv and
  /// efficiency_grid.csv summaries.
  bool grid = false;
};
int cmd_simulate(const SimulateRequest& request, std::ostream& out, std::ostream& err);

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

}  // namespace zss::cli
