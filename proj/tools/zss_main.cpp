// SPDX-License-Identifier: Apache-2.0
// zss: train, sweep, export traces, simulate and report.
#include "harness.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace zss;
using namespace zss::cli;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "experiment manifest (JSON)");
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "override the manifest seed");
  app->add_option("--out", c.out, "override the output directory");
}

ExperimentManifest manifest_for(const Common& c) {
  ExperimentManifest m = load_manifest(c.config);
  if (c.seed) m.seed = *c.seed;
  if (c.out) m.output_dir = *c.out;
  return m;
}

std::vector<ExecutionMode> parse_modes(const std::string& mode) {
  if (mode == "dense") return {ExecutionMode::kDense};
  if (mode == "sparse") return {ExecutionMode::kSparse};
  if (mode == "both") return {ExecutionMode::kDense, ExecutionMode::kSparse};
  throw ConfigError({"--mode: expected dense, sparse or both (got \"" + mode + "\")"});
}

TaskKind parse_task(const std::string& name) {
  try {
    return task_from_string(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError({std::string("--task: ") + e.what()});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-state-skipping LSTM toolkit"};
  app.require_subcommand(1);

  Common train_opts, sweep_opts, trace_opts, sim_opts;
  auto* train = app.add_subcommand("train", "train one model and write a checkpoint");
  add_common(train, train_opts, true);

  auto* sweep = app.add_subcommand("sweep", "train at each threshold and tabulate sparsity vs metric");
  add_common(sweep, sweep_opts, true);

  TraceRequest trace_req;
  std::optional<std::string> checkpoint;
  auto* trace = app.add_subcommand("trace", "export pruned-state traces from a checkpoint");
  add_common(trace, trace_opts, true);
  trace->add_option("--batch", trace_req.batches, "lane counts (repeatable)");
  trace->add_option("--checkpoint", checkpoint, "checkpoint file");
  trace->add_option("--steps", trace_req.steps, "time steps per trace");

  SimulateRequest sim_req;
  std::optional<std::string> sim_trace, sim_task;
  std::string sim_mode = "both";
  std::optional<int> sim_dx;
  auto* simulate = app.add_subcommand("simulate", "run the accelerator model");
  add_common(simulate, sim_opts, false);
  simulate->add_option("--trace", sim_trace, "trace file to replay");
  simulate->add_option("--task", sim_task, "char, word or mnist");
  simulate->add_option("--sparsity", sim_req.sparsity, "synthetic effective sparsity in [0, 1]");
  simulate->add_option("--batch", sim_req.batches, "lane counts (repeatable)");
  simulate->add_option("--mode", sim_mode, "dense, sparse or both");
  simulate->add_option("--steps", sim_req.steps, "synthetic time steps");
  simulate->add_option("--dx", sim_dx, "input size override");
  simulate->add_flag("--grid", sim_req.grid, "all tasks and batch sizes at reference sparsity");

  std::string report_dir = "out";
  auto* report = app.add_subcommand("report", "merge simulation and sweep results");
  report->add_option("--out,dir", report_dir, "directory to scan");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  return guarded(
      [&]() -> int {
        if (*train) return cmd_train(manifest_for(train_opts), out, err);
        if (*sweep) return cmd_sweep(manifest_for(sweep_opts), out, err);
        if (*trace) {
          if (checkpoint) trace_req.checkpoint = *checkpoint;
          return cmd_trace(manifest_for(trace_opts), trace_req, out, err);
        }
        if (*simulate) {
          sim_req.modes = parse_modes(sim_mode);
          if (sim_task) sim_req.task = parse_task(*sim_task);
          if (sim_trace) sim_req.trace = *sim_trace;
          sim_req.d_x = sim_dx;
          if (!sim_opts.config.empty()) {
            const ExperimentManifest m = manifest_for(sim_opts);
            sim_req.accelerator = m.accelerator;
            sim_req.seed = m.seed;
            sim_req.out_dir = m.run_dir();
            if (!sim_req.task) sim_req.task = m.task.task;
            if (sim_req.batches.empty() && !sim_req.trace) sim_req.batches = m.batch_sizes;
            if (!sim_req.d_x && sim_req.trace) {
              if (m.task.task == TaskKind::kWordLm) sim_req.d_x = m.task.embedding_dim;
              if (m.task.task == TaskKind::kSeqMnist) sim_req.d_x = m.task.mnist_row_width;
            }
          } else {
            if (sim_opts.seed) sim_req.seed = *sim_opts.seed;
            if (sim_opts.out) sim_req.out_dir = *sim_opts.out;
          }
          return cmd_simulate(sim_req, out, err);
        }
        if (*report) return cmd_report(report_dir, out, err);
        return kInvalid;
      },
      err);
}
