// SPDX-License-Identifier: Apache-2.0
#include "harness.hpp"

#include "zss/checkpoint.hpp"
#include "zss/numerics.hpp"
#include "zss/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace zss::cli {
namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

TaskData load_data(const ExperimentManifest& m, const TaskConfig& task) {
  return load_task_data(task, m.resolved_data_dir());
}

void check_batches(const std::vector<int>& batches, const AcceleratorConfig& accel) {
  std::vector<std::string> errors;
  for (int b : batches) {
    if (b < 1 || b > accel.scratch_depth) {
      errors.push_back("batch " + std::to_string(b) + ": must lie in [1, scratch_depth=" +
                       std::to_string(accel.scratch_depth) + "]");
    }
  }
  if (!errors.empty()) throw ConfigError(errors);
}

// Quantizes onto the fixed int8 grid of the trace format.
BatchedState to_trace_grid(const Matrix& consumed, double scale) {
  const int d_h = static_cast<int>(consumed.rows());
  const int lanes = static_cast<int>(consumed.cols());
  std::vector<double> values(static_cast<std::size_t>(d_h) * lanes);
  for (int b = 0; b < lanes; ++b) {
    for (int j = 0; j < d_h; ++j) values[static_cast<std::size_t>(b) * d_h + j] = consumed(j, b);
  }
  const auto q = quantize(RealTensor(values, {values.size()}), 8, ScalePolicy::kFixed, scale);
  return BatchedState(d_h, lanes, dequantize(q).data);
}

Json sim_json(const SimReport& r, const WorkloadSpec& w, TaskKind task, double sparsity_pct,
              const std::string& source, const AcceleratorConfig& accel) {
  Json j;
  j["task"] = task_tag(task);
  j["batch"] = w.batch;
  j["mode"] = to_string(r.mode);
  j["source"] = source;
  j["d_x"] = w.d_x;
  j["d_h"] = w.d_h;
  j["input_mode"] = to_string(w.input_mode);
  j["effective_sparsity_pct"] = sparsity_pct;
  j["steps"] = r.steps;
  j["cycles"] = r.cycles;
  j["matvec_cycles"] = r.matvec_cycles;
  j["input_cycles"] = r.input_cycles;
  j["elementwise_cycles"] = r.elementwise_cycles;
  j["macs"] = r.macs;
  j["ops_nominal"] = r.ops_nominal;
  j["ops_executed"] = r.ops_executed;
  j["skipped_positions"] = r.skipped_positions;
  j["time_s"] = r.time_s;
  j["gops"] = r.gops;
  j["power_w"] = r.power_w;
  j["gops_per_watt"] = r.gops_per_watt;
  j["mac_utilization"] = r.mac_utilization;
  j["analytic_speedup"] = analytic_speedup(w, sparsity_pct / 100.0);
  j["accelerator"] = to_json(accel);
  return j;
}

double mean_effective_sparsity(const std::vector<SparseStateVector>& steps) {
  if (steps.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& sv : steps) {
    sum += 100.0 * (1.0 - static_cast<double>(sv.compute_group_count()) / sv.original_length);
  }
  return sum / static_cast<double>(steps.size());
}

TaskKind task_from_tag(const std::string& tag) {
  try {
    return task_from_string(tag);
  } catch (const std::invalid_argument& e) {
    throw ConfigError({e.what()});
  }
}

}  // namespace

const std::vector<ReferenceCell>& reference_cells() {
  static const std::vector<ReferenceCell> cells = {
      {TaskKind::kCharLm, 1, 97, 314.7, 9.6, 3791.6, 115.7},
      {TaskKind::kCharLm, 8, 81, 395.5, 76.4, 4765.1, 920.5},
      {TaskKind::kCharLm, 16, 66, 223.0, 76.4, 2686.7, 920.5},
      {TaskKind::kWordLm, 1, 93, 17.9, 9.6, 215.7, 115.7},
      {TaskKind::kWordLm, 8, 63, 110.8, 76.2, 1335.0, 918.1},
      {TaskKind::kWordLm, 16, 41, 95.6, 76.2, 1151.8, 918.1},
      {TaskKind::kSeqMnist, 1, 83, 50.5, 9.6, 608.4, 115.7},
      {TaskKind::kSeqMnist, 8, 55, 154.3, 74.3, 1859.0, 895.2},
      {TaskKind::kSeqMnist, 16, 43, 124.9, 74.3, 1504.8, 895.2},
  };
  return cells;
}

const ReferenceCell* find_reference(TaskKind task, int batch) {
  for (const auto& c : reference_cells()) {
    if (c.task == task && c.batch == batch) return &c;
  }
  return nullptr;
}

WorkloadSpec reference_workload(TaskKind task, int batch) {
  WorkloadSpec w;
  w.batch = batch;
  switch (task) {
    case TaskKind::kCharLm:
      w.d_x = 50;
      w.d_h = 1000;
      w.input_mode = InputMode::kOneHotLookup;
      break;
    case TaskKind::kWordLm:
      w.d_x = 300;
      w.d_h = 300;
      w.input_mode = InputMode::kDenseVector;
      break;
    case TaskKind::kSeqMnist:
      w.d_x = 1;
      w.d_h = 100;
      w.input_mode = InputMode::kDenseVector;
      break;
  }
  return w;
}

SparseStateVector synthetic_state(int d_h, int lanes, double sparsity, std::mt19937_64& rng) {
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
    throw ConfigError({"sparsity: must lie in [0, 1] (got " + std::to_string(sparsity) + ")"});
  }
  const int skipped = static_cast<int>(std::lround(sparsity * d_h));
  std::vector<int> order(d_h);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  BatchedState s(d_h, lanes);
  std::uniform_int_distribution<int> level(1, 127);
  std::bernoulli_distribution negative(0.5);
  for (int k = skipped; k < d_h; ++k) {
    for (int b = 0; b < lanes; ++b) {
      s.at(b, order[k]) = (negative(rng) ? -1 : 1) * level(rng) / 127.0;
    }
  }
  return encode(s);
}

const char* task_tag(TaskKind task) {
  switch (task) {
    case TaskKind::kCharLm: return "char";
    case TaskKind::kWordLm: return "word";
    case TaskKind::kSeqMnist: return "mnist";
  }
  return "?";
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const TraceFormatError& e) {
    err << "error: malformed trace at byte " << e.offset() << ": " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

int cmd_train(const ExperimentManifest& m, std::ostream& out, std::ostream&) {
  const TaskData data = load_data(m, m.task);
  fs::create_directories(m.run_dir());
  out << "train " << m.id << ": " << to_string(m.task.task) << " d_h=" << m.task.d_h
      << " threshold=" << fixed(m.task.threshold, 4) << " seed=" << m.seed << "\n";
  const TrainResult r = train_task(m.task, data, m.seed, [&](const EpochLog& l) {
    out << "  epoch " << l.epoch << " loss " << fixed(l.loss, 4) << " " << to_string(m.task.metric())
        << " " << fixed(l.metric, 4) << " sparsity " << fixed(l.sparsity, 2) << "%\n";
    out.flush();
  });

  std::ostringstream log;
  write_log_csv(log, r.log);
  write_text(m.run_dir() / "train_log.csv", log.str());
  save_checkpoint(m.run_dir() / "checkpoint.zck", {r.model, m.task, m.seed, data.vocab_size});

  Json summary;
  summary["id"] = m.id;
  summary["seed"] = m.seed;
  summary["task"] = to_json(m.task);
  summary["epochs"] = r.log.size();
  summary["metric_kind"] = to_string(m.task.metric());
  summary["final_loss"] = r.final_eval.mean_loss;
  summary["final_metric"] = r.final_eval.metric;
  summary["final_sparsity_pct"] = r.final_eval.sparsity;
  write_json(m.run_dir() / "train_summary.json", summary);
  out << "wrote checkpoint.zck, train_log.csv and train_summary.json\n";
  return kOk;
}

int cmd_sweep(const ExperimentManifest& m, std::ostream& out, std::ostream& err) {
  if (m.thresholds.empty()) throw ConfigError({"thresholds: empty; nothing to sweep"});
  const TaskData data = load_data(m, m.task);
  fs::create_directories(m.run_dir());
  const SweepResult s = sparsity_sweep(m.task, data, m.thresholds, m.seed);

  std::ostringstream csv;
  write_sweep_csv(csv, s);
  write_text(m.run_dir() / "sweep.csv", csv.str());

  Json j;
  j["id"] = m.id;
  j["seed"] = m.seed;
  j["task"] = to_json(m.task);
  j["metric_kind"] = to_string(m.task.metric());
  j["dense_metric"] = s.dense_metric;
  j["rows"] = Json::array();
  for (const auto& row : s.rows) {
    Json rj;
    rj["threshold"] = row.threshold;
    rj["sparsity_pct"] = row.sparsity;
    rj["metric"] = row.metric;
    rj["sweet_spot"] = row.sweet_spot;
    rj["error"] = row.error;
    j["rows"].push_back(rj);
  }
  j["sweet_spot"] = s.sweet_spot ? Json(*s.sweet_spot) : Json(nullptr);
  write_json(m.run_dir() / "sweep.json", j);

  out << "threshold  sparsity%  " << to_string(m.task.metric()) << "\n";
  int failures = 0;
  for (const auto& row : s.rows) {
    if (!row.error.empty()) {
      err << "warning: threshold " << fixed(row.threshold, 4) << " failed: " << row.error << "\n";
      ++failures;
      continue;
    }
    out << fixed(row.threshold, 4) << "     " << fixed(row.sparsity, 2) << "     "
        << fixed(row.metric, 4) << (row.sweet_spot ? "  <- sweet spot" : "") << "\n";
  }
  out << "dense " << to_string(m.task.metric()) << " " << fixed(s.dense_metric, 4) << "\n";
  return failures == static_cast<int>(s.rows.size()) ? kRuntimeFailure : kOk;
}

int cmd_trace(const ExperimentManifest& m, const TraceRequest& req, std::ostream& out,
              std::ostream& err) {
  const std::vector<int> batches = req.batches.empty() ? m.batch_sizes : req.batches;
  for (int b : batches) {
    if (b < 1) throw ConfigError({"batch " + std::to_string(b) + ": must be >= 1"});
  }
  const int steps = req.steps.value_or(m.trace.steps);
  if (steps < 1) throw ConfigError({"steps: must be >= 1"});
  const fs::path ckpt_path = req.checkpoint ? *req.checkpoint
                             : !m.trace.checkpoint.empty() ? m.trace.checkpoint
                                                           : m.run_dir() / "checkpoint.zck";
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const TaskData data = load_data(m, ck.config);
  fs::create_directories(m.run_dir());

  const double scale = 1.0 / 127.0;
  std::string table = "batch,steps,d_h,effective_sparsity_pct,element_sparsity_pct\n";
  out << "batch  steps  effective sparsity%  element sparsity%\n";
  for (int b : batches) {
    if (b > m.accelerator.scratch_depth) {
      err << "warning: batch " << b << " exceeds the scratch depth ("
          << m.accelerator.scratch_depth << "); the simulator will reject this trace\n";
    }
    const auto states =
        consumed_states(ck.model, ck.config, data, ck.config.threshold, b, steps, m.trace.use_test);
    StateTrace trace;
    trace.d_h = ck.model.lstm.d_h;
    trace.lanes = b;
    trace.scale = scale;
    std::size_t zeros = 0, elements = 0;
    for (const auto& s : states) {
      const BatchedState grid = to_trace_grid(s, scale);
      zeros += std::count(grid.values.begin(), grid.values.end(), 0.0);
      elements += grid.values.size();
      trace.steps.push_back(encode(grid, trace.counter_width));
    }
    write_trace(m.run_dir() / ("trace_b" + std::to_string(b) + ".zst"), trace);
    const double eff = mean_effective_sparsity(trace.steps);
    const double elem = elements ? 100.0 * static_cast<double>(zeros) / elements : 0.0;
    table += std::to_string(b) + "," + std::to_string(trace.steps.size()) + "," +
             std::to_string(trace.d_h) + "," + fixed(eff, 4) + "," + fixed(elem, 4) + "\n";
    out << b << "  " << trace.steps.size() << "  " << fixed(eff, 2) << "  " << fixed(elem, 2)
        << "\n";
  }
  write_text(m.run_dir() / "sparsity_table.csv", table);
  return kOk;
}

int cmd_simulate(const SimulateRequest& req, std::ostream& out, std::ostream&) {
  try {
    req.accelerator.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError({e.what()});
  }
  if (req.steps < 1) throw ConfigError({"steps: must be >= 1"});
  if (req.modes.empty()) throw ConfigError({"mode: no execution mode selected"});
  fs::create_directories(req.out_dir);

  struct Cell {
    TaskKind task;
    WorkloadSpec workload;
    double sparsity_pct;
    std::string source;
  };
  std::vector<Cell> cells;

  if (req.trace) {
    if (req.grid) throw ConfigError({"--grid and --trace are exclusive"});
    if (!req.task) throw ConfigError({"--task is required with --trace (sets the input size)"});
    const StateTrace t = read_trace(*req.trace);
    check_batches({t.lanes}, req.accelerator);
    WorkloadSpec w = reference_workload(*req.task, t.lanes);
    if (req.d_x) w.d_x = *req.d_x;
    w.d_h = t.d_h;
    w.trace = t.steps;
    cells.push_back({*req.task, w, mean_effective_sparsity(t.steps), req.trace->filename().string()});
  } else {
    std::vector<TaskKind> tasks;
    if (req.grid) {
      tasks = {TaskKind::kCharLm, TaskKind::kWordLm, TaskKind::kSeqMnist};
    } else if (req.task) {
      tasks = {*req.task};
    } else {
      throw ConfigError({"simulate needs --trace, --task or --grid"});
    }
    const std::vector<int> batches = req.batches.empty() ? std::vector<int>{1, 8, 16} : req.batches;
    check_batches(batches, req.accelerator);
    for (TaskKind task : tasks) {
      for (int b : batches) {
        double s = 0.0;
        if (req.sparsity && !req.grid) {
          s = *req.sparsity;
        } else if (const ReferenceCell* ref = find_reference(task, b)) {
          s = ref->sparsity_pct / 100.0;
        } else {
          throw ConfigError({std::string("no reference sparsity for ") + task_tag(task) +
                             " at batch " + std::to_string(b) + "; pass --sparsity"});
        }
        WorkloadSpec w = reference_workload(task, b);
        if (req.d_x) w.d_x = *req.d_x;
        std::mt19937_64 rng(req.seed * 1000003ULL + static_cast<std::uint64_t>(task) * 101 + b);
        for (int t = 0; t < req.steps; ++t) w.trace.push_back(synthetic_state(w.d_h, b, s, rng));
        cells.push_back({task, w, mean_effective_sparsity(w.trace), "synthetic"});
      }
    }
  }

  std::string throughput_csv = "task,batch,mode,gops,reference_gops\n";
  std::string efficiency_csv = "task,batch,mode,gops_per_watt,reference_gops_per_watt\n";
  out << "task   batch  mode    sparsity%  cycles      GOPS      GOPS/W\n";
  for (const Cell& c : cells) {
    for (ExecutionMode mode : req.modes) {
      const SimReport r =
          energy_report(simulate_workload(req.accelerator, c.workload, mode), req.accelerator);
      const std::string name = std::string("sim_") + task_tag(c.task) + "_b" +
                               std::to_string(c.workload.batch) + "_" + to_string(mode) + ".json";
      write_json(req.out_dir / name,
                 sim_json(r, c.workload, c.task, c.sparsity_pct, c.source, req.accelerator));
      char line[160];
      std::snprintf(line, sizeof line, "%-6s %5d  %-6s  %8.2f  %10lld  %8.2f  %8.1f\n",
                    task_tag(c.task), c.workload.batch, to_string(mode), c.sparsity_pct,
                    static_cast<long long>(r.cycles), r.gops, r.gops_per_watt);
      out << line;
      const ReferenceCell* ref = find_reference(c.task, c.workload.batch);
      const bool sparse = mode == ExecutionMode::kSparse;
      const std::string key =
          std::string(task_tag(c.task)) + "," + std::to_string(c.workload.batch) + "," + to_string(mode);
      throughput_csv += key + "," + fixed(r.gops, 4) + "," +
              (ref ? fixed(sparse ? ref->sparse_gops : ref->dense_gops, 1) : "") + "\n";
      efficiency_csv += key + "," + fixed(r.gops_per_watt, 4) + "," +
              (ref ? fixed(sparse ? ref->sparse_gops_per_watt : ref->dense_gops_per_watt, 1) : "") +
              "\n";
    }
  }
  if (req.grid) {
    write_text(req.out_dir / "throughput_grid.csv", throughput_csv);
    write_text(req.out_dir / "efficiency_grid.csv", efficiency_csv);
  }
  return kOk;
}

int cmd_report(const fs::path& dir, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(dir)) {
    throw ConfigError({"report: " + dir.string() + " is not a directory"});
  }
  std::vector<fs::path> sims, sweeps;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.rfind("sim_", 0) == 0 && e.path().extension() == ".json") sims.push_back(e.path());
    if (name == "sweep.json") sweeps.push_back(e.path());
  }
  auto rel = [&](const fs::path& p) { return p.lexically_relative(dir).string(); };
  std::sort(sims.begin(), sims.end());
  std::sort(sweeps.begin(), sweeps.end());
  if (sims.empty() && sweeps.empty()) {
    out << "nothing to report in " << dir.string() << "\n";
    return kOk;
  }

  struct Measured {
    std::int64_t cycles = 0;
    double gops = 0.0;
    double gops_per_watt = 0.0;
    double sparsity_pct = 0.0;
    fs::path file;
  };
  // (task, batch) -> mode -> result
  std::map<std::pair<int, int>, std::map<std::string, Measured>> cells;
  std::vector<std::string> problems;
  for (const auto& p : sims) {
    Json j;
    try {
      std::ifstream is(p);
      j = Json::parse(is);
      const TaskKind task = task_from_tag(j.at("task").get<std::string>());
      const int batch = j.at("batch").get<int>();
      const std::string mode = j.at("mode").get<std::string>();
      Measured m;
      m.cycles = j.at("cycles").get<std::int64_t>();
      const double ops = j.at("ops_nominal").get<double>();
      const double time_s = j.at("time_s").get<double>();
      const double power = j.at("power_w").get<double>();
      m.gops = time_s > 0 ? ops / time_s / 1e9 : 0.0;
      m.gops_per_watt = power > 0 ? m.gops / power : 0.0;
      m.sparsity_pct = j.at("effective_sparsity_pct").get<double>();
      m.file = p;
      if (std::fabs(m.gops - j.at("gops").get<double>()) > 1e-9 * std::max(1.0, m.gops)) {
        problems.push_back(rel(p) + ": stored gops disagrees with ops/time");
      }
      auto& slot = cells[{static_cast<int>(task), batch}];
      if (slot.count(mode)) {
        problems.push_back(rel(p) + ": duplicates " + rel(slot[mode].file) + " (kept the later)");
      }
      slot[mode] = m;
    } catch (const std::exception& e) {
      problems.push_back(rel(p) + ": unreadable (" + e.what() + ")");
    }
  }

  auto within = [](double v, double ref) { return std::fabs(v / ref - 1.0) <= 0.10; };
  auto opt = [](bool have, double v, int digits) { return have ? fixed(v, digits) : std::string(); };

  std::string csv =
      "task,batch,sparsity_pct,dense_gops,sparse_gops,speedup,dense_gops_per_watt,"
      "sparse_gops_per_watt,ref_dense_gops,ref_sparse_gops,ref_speedup,"
      "ref_dense_gops_per_watt,ref_sparse_gops_per_watt,within_10pct\n";
  Json report;
  report["directory"] = dir.filename().string();
  report["cells"] = Json::array();
  int passed = 0, compared = 0;
  out << "task   batch  sparsity%  dense GOPS  sparse GOPS  speedup  sparse GOPS/W  check\n";
  for (const auto& [key, modes] : cells) {
    const auto task = static_cast<TaskKind>(key.first);
    const int batch = key.second;
    const bool has_d = modes.count("dense") > 0, has_s = modes.count("sparse") > 0;
    const Measured d = has_d ? modes.at("dense") : Measured{};
    const Measured s = has_s ? modes.at("sparse") : Measured{};
    if (!has_d) problems.push_back(std::string("missing: ") + task_tag(task) + " b" + std::to_string(batch) + " dense");
    if (!has_s) problems.push_back(std::string("missing: ") + task_tag(task) + " b" + std::to_string(batch) + " sparse");
    const bool both = has_d && has_s && s.cycles > 0;
    const double speedup = both ? static_cast<double>(d.cycles) / s.cycles : 0.0;
    const ReferenceCell* ref = find_reference(task, batch);

    std::string verdict = "n/a";
    if (ref && both) {
      const bool ok = within(s.gops, ref->sparse_gops) && within(d.gops, ref->dense_gops) &&
                      within(s.gops_per_watt, ref->sparse_gops_per_watt) &&
                      within(d.gops_per_watt, ref->dense_gops_per_watt) &&
                      within(speedup, ref->sparse_gops / ref->dense_gops);
      verdict = ok ? "pass" : "FAIL";
      ++compared;
      passed += ok ? 1 : 0;
    }
    const double sp = has_s ? s.sparsity_pct : d.sparsity_pct;
    csv += std::string(task_tag(task)) + "," + std::to_string(batch) + "," + fixed(sp, 2) + "," +
           opt(has_d, d.gops, 4) + "," + opt(has_s, s.gops, 4) + "," + opt(both, speedup, 4) + "," +
           opt(has_d, d.gops_per_watt, 2) + "," + opt(has_s, s.gops_per_watt, 2) + "," +
           opt(ref, ref ? ref->dense_gops : 0, 1) + "," + opt(ref, ref ? ref->sparse_gops : 0, 1) +
           "," + opt(ref, ref ? ref->sparse_gops / ref->dense_gops : 0, 4) + "," +
           opt(ref, ref ? ref->dense_gops_per_watt : 0, 1) + "," +
           opt(ref, ref ? ref->sparse_gops_per_watt : 0, 1) + "," + verdict + "\n";

    Json cj;
    cj["task"] = task_tag(task);
    cj["batch"] = batch;
    cj["sparsity_pct"] = sp;
    cj["dense_gops"] = has_d ? Json(d.gops) : Json(nullptr);
    cj["sparse_gops"] = has_s ? Json(s.gops) : Json(nullptr);
    cj["speedup"] = both ? Json(speedup) : Json(nullptr);
    cj["dense_gops_per_watt"] = has_d ? Json(d.gops_per_watt) : Json(nullptr);
    cj["sparse_gops_per_watt"] = has_s ? Json(s.gops_per_watt) : Json(nullptr);
    cj["check"] = verdict;
    report["cells"].push_back(cj);

    char line[200];
    std::snprintf(line, sizeof line, "%-6s %5d  %8.2f  %10s  %11s  %7s  %13s  %s\n",
                  task_tag(task), batch, sp, opt(has_d, d.gops, 2).c_str(),
                  opt(has_s, s.gops, 2).c_str(), opt(both, speedup, 2).c_str(),
                  opt(has_s, s.gops_per_watt, 1).c_str(), verdict.c_str());
    out << line;
  }

  report["sweeps"] = Json::array();
  for (const auto& p : sweeps) {
    try {
      std::ifstream is(p);
      const Json j = Json::parse(is);
      Json sj;
      sj["id"] = j.at("id");
      sj["metric_kind"] = j.at("metric_kind");
      sj["dense_metric"] = j.at("dense_metric");
      if (!j.at("sweet_spot").is_null()) {
        const Json& row = j.at("rows").at(j.at("sweet_spot").get<std::size_t>());
        sj["sweet_spot"] = row;
        out << "sweep " << j.at("id").get<std::string>() << ": sweet spot at threshold "
            << fixed(row.at("threshold").get<double>(), 4) << ", sparsity "
            << fixed(row.at("sparsity_pct").get<double>(), 2) << "%, "
            << j.at("metric_kind").get<std::string>() << " "
            << fixed(row.at("metric").get<double>(), 4) << " (dense "
            << fixed(j.at("dense_metric").get<double>(), 4) << ")\n";
      } else {
        sj["sweet_spot"] = nullptr;
        out << "sweep " << j.at("id").get<std::string>() << ": no threshold within tolerance\n";
      }
      report["sweeps"].push_back(sj);
    } catch (const std::exception& e) {
      problems.push_back(rel(p) + ": unreadable (" + e.what() + ")");
    }
  }

  report["reference_cells_compared"] = compared;
  report["reference_cells_passed"] = passed;
  report["problems"] = problems;
  if (!cells.empty()) write_text(dir / "report.csv", csv);
  write_json(dir / "report.json", report);
  if (compared > 0) out << passed << "/" << compared << " reference cells within 10%\n";
  for (const auto& p : problems) err << "note: " << p << "\n";
  return kOk;
}

}  // namespace zss::cli
