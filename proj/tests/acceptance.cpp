// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include "gradcheck.hpp"
#include "harness.hpp"
#include "oracles.hpp"
#include "zss/accel_sim.hpp"
#include "zss/lstm.hpp"
#include "zss/sparse_state.hpp"
#include "zss/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace zss;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("[%s] C%-2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string f(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

WorkloadSpec char_workload(int batch) { return cli::reference_workload(TaskKind::kCharLm, batch); }

SimReport simulate(const WorkloadSpec& w, ExecutionMode mode) {
  AcceleratorConfig cfg;
  return energy_report(simulate_workload(cfg, w, mode), cfg);
}

WorkloadSpec with_reference_sparsity(WorkloadSpec w, double s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  w.trace = {cli::synthetic_state(w.d_h, w.batch, s, rng)};
  return w;
}

bool within(double v, double ref, double tol) { return std::fabs(v / ref - 1.0) <= tol; }

// Criterion 5
Outcome oracle_equivalence() {
  std::mt19937_64 rng(501);
  const int lane_choices[] = {1, 2, 4};
  int cases = 0;
  for (int trial = 0; trial < 600; ++trial) {
    AcceleratorConfig cfg;
    cfg.tiles = 1 + static_cast<int>(rng() % 4);
    cfg.pes_per_tile = 1 + static_cast<int>(rng() % (16 / cfg.tiles));
    std::vector<int> divisors;
    for (int w = 1; w <= cfg.total_pes(); ++w) {
      if (cfg.total_pes() % w == 0) divisors.push_back(w);
    }
    cfg.weights_per_cycle = divisors[rng() % divisors.size()];
    cfg.inputs_per_cycle = 1 + static_cast<int>(rng() % 3);
    const int lanes = lane_choices[rng() % 3];
    const int d_h = 1 + static_cast<int>(rng() % 32);
    const double s = (rng() % 101) / 100.0;
    std::mt19937_64 local(rng());
    const auto sv = cli::synthetic_state(d_h, lanes, s, local);
    const BatchedState st = decode(sv);
    for (auto mode : {ExecutionMode::kDense, ExecutionMode::kSparse}) {
      const auto r = simulate_matvec(cfg, 4 * d_h, st, mode);
      const int positions = mode == ExecutionMode::kDense ? d_h
                                                          : static_cast<int>(sv.compute_group_count());
      const auto o = oracle::event_list_cycles(cfg, 4 * d_h, positions, lanes);
      ++cases;
      // oracle events are per weight block and lane; simulator MACs are per row and lane
      const std::int64_t blocks = (4 * d_h + cfg.weights_per_cycle - 1) / cfg.weights_per_cycle;
      const bool macs_ok =
          o.mac_events == blocks * positions * lanes &&
          r.macs == static_cast<std::int64_t>(4 * d_h) * positions * lanes;
      if (r.cycles != o.cycles || !macs_ok) {
        return {false, "mismatch at case " + std::to_string(cases) + ": simulator " +
                           std::to_string(r.cycles) + " cycles, " + std::to_string(r.macs) +
                           " MACs vs oracle " + std::to_string(o.cycles) + " cycles, " +
                           std::to_string(o.mac_events) + " block events"};
      }
    }
  }
  return {cases >= 1000, std::to_string(cases) + " cases, cycle and MAC counts identical"};
}

// Criterion 6
Outcome numeric_equivalence() {
  std::mt19937_64 rng(601);
  std::uniform_int_distribution<int> w8(-128, 127), q8(-127, 127), dh(1, 128);
  const double scale = 1.0 / 127.0;
  int cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d_h = dh(rng);
    const int lanes = 1 << (rng() % 5);
    QuantizedTensor w;
    w.shape = {static_cast<std::size_t>(4 * d_h), static_cast<std::size_t>(d_h)};
    w.data.resize(w.shape[0] * w.shape[1]);
    for (auto& v : w.data) v = static_cast<std::int8_t>(w8(rng));
    BatchedState st(d_h, lanes);
    std::bernoulli_distribution zero((rng() % 100) / 100.0);
    for (auto& v : st.values) v = zero(rng) ? 0.0 : q8(rng) * scale;
    const auto acc = sparse_preactivation_accumulators(w, encode(st), scale);
    for (int b = 0; b < lanes; ++b) {
      std::vector<std::int8_t> v(d_h);
      for (int j = 0; j < d_h; ++j) {
        v[j] = static_cast<std::int8_t>(std::lround(st.at(b, j) / scale));
      }
      if (acc[b] != oracle::triple_loop(w.data, w.shape[0], w.shape[1], v)) {
        return {false, "accumulator mismatch at case " + std::to_string(trial)};
      }
    }
    ++cases;
  }
  return {cases >= 1000, std::to_string(cases) + " cases, accumulators bit-identical"};
}

// Criterion 7
Outcome gradients() {
  std::mt19937_64 rng(701);
  std::uniform_int_distribution<int> dim(1, 8), len(1, 5), pdim(2, 8);
  double dense_worst = 0.0, pruned_worst = 0.0;
  int pruned_compared = 0, flips = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = trial % 2 ? LossKind::kCrossEntropy : LossKind::kSquaredError;
    const auto inst = gradcheck::random_instance(rng, dim(rng), dim(rng), len(rng));
    dense_worst = std::max(dense_worst, gradcheck::dense_check(inst, kind));
    const auto pinst = gradcheck::random_instance(rng, pdim(rng), pdim(rng), len(rng));
    const auto r = gradcheck::pruned_check(pinst, 0.1 + 0.3 * (trial % 4) / 3.0, kind);
    pruned_worst = std::max(pruned_worst, r.max_rel_error);
    pruned_compared += r.compared;
    flips += r.skipped_flips;
  }
  const bool ok = dense_worst <= 1e-4 && pruned_worst <= 1e-4 && pruned_compared > 0;
  return {ok, f("dense max rel err %.2e, pruned max rel err %.2e over %.0f coordinates "
                "(%.0f mask flips skipped)",
                dense_worst, pruned_worst, pruned_compared, flips)};
}

// Criterion 8
Outcome pruning_algebra() {
  std::mt19937_64 rng(801);
  std::uniform_real_distribution<double> u(-1.5, 1.5), ut(0.0, 1.0);
  int vectors = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Vector h(1 + trial % 64);
    for (auto& v : h) v = u(rng);
    const double t1 = ut(rng), t2 = ut(rng);
    const double lo = std::min(t1, t2), hi = std::max(t1, t2);
    const Vector p = prune_state(h, lo);
    const bool idempotent = prune_state(p, lo) == p;
    const bool odd = prune_state(Vector(-h), lo) == Vector(-p);
    const bool monotone =
        (p.array() == 0).count() <= (prune_state(h, hi).array() == 0).count();
    const bool identity = prune_state(h, 0.0) == h;
    if (!(idempotent && odd && monotone && identity)) {
      return {false, "property violated on vector " + std::to_string(trial)};
    }
    ++vectors;
  }
  return {vectors >= 10000, std::to_string(vectors) +
                                " vectors: idempotent, odd, monotone in T, identity at T=0"};
}

// Criterion 9
Outcome encoder_round_trip() {
  std::mt19937_64 rng(901);
  std::uniform_int_distribution<int> len(1, 2048);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pz(0.0, 1.0);
  int cases = 0, with_escapes = 0;
  for (int lanes : {1, 2, 8, 16}) {
    for (int trial = 0; trial < 300; ++trial) {
      const int d_h = len(rng);
      const double p = trial % 3 == 0 ? 0.999 : pz(rng);
      BatchedState s(d_h, lanes);
      std::bernoulli_distribution zero(p);
      for (auto& v : s.values) v = zero(rng) ? 0.0 : u(rng);
      const auto sv = encode(s);
      if (decode(sv).values != s.values) {
        return {false, "round trip failed at B=" + std::to_string(lanes) + ", case " +
                           std::to_string(trial)};
      }
      with_escapes += sv.escape_group_count() > 0 ? 1 : 0;
      ++cases;
    }
  }
  return {cases >= 1000 && with_escapes > 0,
          std::to_string(cases) + " cases over B in {1,2,8,16}, " + std::to_string(with_escapes) +
              " with counter-overflow escapes"};
}

// Criterion 10
Outcome desk_learning() {
  const auto t0 = Clock::now();
  const TaskConfig cfg = TaskConfig::desk_char();
  const TaskData data =
      TaskData::from_corpus(load_ptb_char(fs::path(ZSS_TEST_DATA_DIR) / "ptb_char_tiny"));
  const SweepResult sweep = sparsity_sweep(cfg, data, cfg.threshold_sweep, 2018);
  std::string rows;
  const SweepRow* best = nullptr;
  for (const auto& r : sweep.rows) {
    rows += f(" T=%.2f:%.1f%%/%.3f", r.threshold, r.sparsity, r.metric);
    if (!r.error.empty()) continue;
    if (r.sparsity >= 70.0 && r.metric <= sweep.dense_metric + 0.15) {
      if (!best || r.sparsity > best->sparsity) best = &r;
    }
  }
  const double secs = elapsed(t0);
  const bool ok = best && secs < 15 * 60;
  std::string detail = f("dense BPC %.3f;", sweep.dense_metric) + rows;
  if (best) {
    detail += f("; T=%.2f reaches %.1f%% sparsity at BPC %.3f (delta %+.3f)", best->threshold,
                best->sparsity, best->metric, best->metric - sweep.dense_metric);
  } else {
    detail += "; no threshold with >=70% sparsity within 0.15 BPC";
  }
  return {ok, detail};
}

// Criterion 11
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream s;
    s << is.rdbuf();
    files[e.path().lexically_relative(root).string()] = s.str();
  }
  return files;
}

std::string run_all_commands(const fs::path& root) {
  fs::create_directories(root);
  std::ostringstream log;
  const Json manifest = Json::parse(R"({
    "id": "det", "seed": 11, "output_dir": "out",
    "task": {"preset": "desk_char", "d_h": 24, "epochs": 2, "max_train_batches": 15,
             "max_eval_batches": 4, "threshold": 0.3},
    "thresholds": [0.0, 0.3],
    "batch_sizes": [1, 4],
    "trace": {"steps": 12}
  })");
  ExperimentManifest m = parse_manifest(manifest, root);
  m.data_dir = fs::path(ZSS_TEST_DATA_DIR) / "ptb_char_tiny";
  auto step = [&](const char* name, int code) {
    log << "== " << name << " exit " << code << "\n";
    if (code != cli::kOk) throw std::runtime_error(std::string(name) + " failed");
  };
  step("train", cli::cmd_train(m, log, log));
  step("sweep", cli::cmd_sweep(m, log, log));
  step("trace", cli::cmd_trace(m, {}, log, log));
  cli::SimulateRequest grid;
  grid.out_dir = m.run_dir() / "grid";
  grid.grid = true;
  step("simulate --grid", cli::cmd_simulate(grid, log, log));
  cli::SimulateRequest replay;
  replay.out_dir = m.run_dir() / "replay";
  replay.trace = m.run_dir() / "trace_b4.zst";
  replay.task = TaskKind::kCharLm;
  step("simulate --trace", cli::cmd_simulate(replay, log, log));
  step("report", cli::cmd_report(m.run_dir(), log, log));
  return log.str();
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() /
                        ("zss_accept_" + std::to_string(std::random_device{}()));
  const std::string log_a = run_all_commands(base / "a");
  const std::string log_b = run_all_commands(base / "b");
  const auto a = tree(base / "a"), b = tree(base / "b");
  fs::remove_all(base);
  if (log_a != log_b) return {false, "console output differs between runs"};
  if (a.size() != b.size()) return {false, "runs produced different file sets"};
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) return {false, name + " differs between runs"};
  }
  return {a.size() >= 10, std::to_string(a.size()) +
                              " files (train, sweep, trace, simulate, report) byte-identical "
                              "across two runs, console output identical"};
}

}  // namespace

int main() {
  std::printf("acceptance gate\n");

  run(1, "dense peak calibration", [] {
    const auto t0 = Clock::now();
    const auto r = simulate(char_workload(8), ExecutionMode::kDense);
    const double secs = elapsed(t0);
    const bool ok = r.gops >= 76.4 * 0.98 && r.gops <= 76.8 * 1.02 && secs < 60;
    return Outcome{ok, f("d_h=1000 one-hot B=8 dense: %.2f GOPS (target 76.4-76.8 +/-2%%)", r.gops)};
  });

  run(2, "batch-1 dense", [] {
    const auto r = simulate(char_workload(1), ExecutionMode::kDense);
    return Outcome{within(r.gops, 9.6, 0.02), f("B=1 dense: %.3f GOPS (target 9.6 +/-2%%)", r.gops)};
  });

  run(3, "headline speedup", [] {
    const auto w = with_reference_sparsity(char_workload(8), 0.81, 3);
    const auto sparse = simulate(w, ExecutionMode::kSparse);
    const auto dense = simulate(w, ExecutionMode::kDense);
    const double speedup = static_cast<double>(dense.cycles) / sparse.cycles;
    const bool ok = within(speedup, 5.2, 0.10) && within(sparse.gops, 395.5, 0.10);
    return Outcome{ok, f("char B=8 at 81%% sparsity: speedup %.2fx (target 5.2 +/-10%%), "
                         "%.1f GOPS (target 395.5 +/-10%%)",
                         speedup, sparse.gops)};
  });

  run(4, "nine-cell throughput and efficiency", [] {
    const auto t0 = Clock::now();
    int ok_cells = 0;
    double worst = 0.0;
    std::string worst_cell;
    for (const auto& ref : cli::reference_cells()) {
      const auto w = with_reference_sparsity(cli::reference_workload(ref.task, ref.batch),
                                             ref.sparsity_pct / 100.0, 4 + ref.batch);
      const auto r = simulate(w, ExecutionMode::kSparse);
      const double e1 = std::fabs(r.gops / ref.sparse_gops - 1.0);
      const double e2 = std::fabs(r.gops_per_watt / ref.sparse_gops_per_watt - 1.0);
      if (e1 <= 0.10 && e2 <= 0.10) ++ok_cells;
      if (std::max(e1, e2) > worst) {
        worst = std::max(e1, e2);
        worst_cell = std::string(cli::task_tag(ref.task)) + " B=" + std::to_string(ref.batch);
      }
    }
    const double secs = elapsed(t0);
    return Outcome{ok_cells == 9 && secs < 600,
                   f("%.0f/9 cells within 10%% on GOPS and GOPS/W; worst deviation %.1f%%",
                     ok_cells, 100 * worst) +
                       " (" + worst_cell + ")"};
  });

  run(5, "simulator vs event-list oracle", oracle_equivalence);
  run(6, "sparse vs dense pre-activations", numeric_equivalence);
  run(7, "BPTT gradients vs finite differences", gradients);
  run(8, "pruning algebra", pruning_algebra);
  run(9, "encoder round trip", encoder_round_trip);
  run(10, "desk-scale sparsity vs BPC", desk_learning);
  run(11, "determinism", determinism);

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
