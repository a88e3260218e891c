// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "harness.hpp"
#include "zss/checkpoint.hpp"
#include "zss/config.hpp"
#include "zss/trace_io.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace zss;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("zss_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream s;
  s << is.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("manifest: presets, overrides and path resolution") {
  const Json j = Json::parse(R"({
    "id": "run-1", "seed": 9, "data_dir": "data/ptb",
    "task": {"preset": "desk_word", "epochs": 2, "grad_clip_norm": null},
    "accelerator": {"scratch_depth": 8},
    "batch_sizes": [1, 4],
    "trace": {"steps": 12, "split": "valid"}
  })");
  const auto m = parse_manifest(j, "/base");
  CHECK(m.id == "run-1");
  CHECK(m.seed == 9);
  CHECK(m.task.task == TaskKind::kWordLm);
  CHECK(m.task.epochs == 2);
  CHECK(m.task.embedding_dim == TaskConfig::desk_word().embedding_dim);
  CHECK_FALSE(m.task.grad_clip_norm.has_value());
  CHECK(m.accelerator.scratch_depth == 8);
  CHECK(m.data_dir == fs::path("/base/data/ptb"));
  CHECK(m.run_dir() == fs::path("/base/out/run-1"));
  CHECK(m.trace.steps == 12);
  CHECK_FALSE(m.trace.use_test);
  CHECK(m.thresholds == TaskConfig::desk_word().threshold_sweep);
}

TEST_CASE("manifest: every problem is listed") {
  const Json j = Json::parse(R"({
    "id": "bad id!",
    "task": {"preset": "desk_char", "d_h": 0, "epochs": "three", "colour": 1},
    "accelerator": {"frequency_hz": 0},
    "thresholds": [0.5, 0.1]
  })");
  try {
    parse_manifest(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* needle : {"id:", "task.d_h", "task.epochs", "task.colour", "frequency_hz",
                               "thresholds"}) {
      CAPTURE(needle);
      CHECK(msg.find(needle) != std::string::npos);
    }
    CHECK(e.problems().size() >= 6);
  }
  CHECK_THROWS_WITH_AS(parse_manifest(Json::parse(R"({"seed": 1})")), doctest::Contains("id: required"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_manifest(Json::parse(R"({"id": "x", "task": {"preset": "huge"}})")),
                       doctest::Contains("desk_char"), ConfigError);
}

TEST_CASE("task config JSON round trip") {
  for (const auto& c : {TaskConfig::full_word(), TaskConfig::desk_mnist()}) {
    std::vector<std::string> errors;
    const auto back = task_config_from_json(to_json(c), TaskConfig{}, errors);
    CHECK(errors.empty());
    CHECK(to_json(back) == to_json(c));
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  TempDir d("ckpt");
  TaskConfig cfg = TaskConfig::desk_word();
  cfg.d_h = 6;
  cfg.embedding_dim = 4;
  TaskData data;
  data.vocab_size = 11;
  data.train = data.valid = {1, 2, 3};
  std::mt19937_64 rng(81);
  Checkpoint ck{init_model(cfg, data, rng), cfg, 42, 11};
  save_checkpoint(d.path / "m.zck", ck);
  const auto back = load_checkpoint(d.path / "m.zck");
  CHECK(back.model.lstm.w_h == ck.model.lstm.w_h);
  CHECK(back.model.lstm.w_x == ck.model.lstm.w_x);
  CHECK(back.model.lstm.b == ck.model.lstm.b);
  CHECK(back.model.embedding == ck.model.embedding);
  CHECK(back.model.w_out == ck.model.w_out);
  CHECK(back.model.b_out == ck.model.b_out);
  CHECK(back.seed == 42);
  CHECK(back.vocab_size == 11);
  CHECK(to_json(back.config) == to_json(cfg));

  std::string bytes = slurp(d.path / "m.zck");
  CHECK(bytes.substr(0, 7) == "ZSSCKPT");
  std::ofstream(d.path / "short.zck", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_WITH_AS(load_checkpoint(d.path / "short.zck"), doctest::Contains("payload"),
                       CheckpointError);
  bytes[0] = 'X';
  std::ofstream(d.path / "magic.zck", std::ios::binary) << bytes;
  CHECK_THROWS_WITH_AS(load_checkpoint(d.path / "magic.zck"), doctest::Contains("magic"),
                       CheckpointError);
}

TEST_CASE("synthetic states hit the requested sparsity exactly") {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 50; ++trial) {
    const int d_h = 1 + static_cast<int>(rng() % 1200);
    const int lanes = 1 + static_cast<int>(rng() % 16);
    const double s = (rng() % 101) / 100.0;
    const auto sv = cli::synthetic_state(d_h, lanes, s, rng);
    REQUIRE(sv.compute_group_count() == static_cast<std::size_t>(d_h - std::lround(s * d_h)));
  }
}

TEST_CASE("simulate and report") {
  TempDir d("sim");
  std::ostringstream out, err;
  cli::SimulateRequest req;
  req.out_dir = d.path / "grid";
  req.grid = true;
  REQUIRE(cli::cmd_simulate(req, out, err) == cli::kOk);
  CHECK(fs::exists(req.out_dir / "sim_word_b16_sparse.json"));
  const std::string grid_csv = slurp(req.out_dir / "throughput_grid.csv");
  CHECK(grid_csv.rfind("task,batch,mode,gops,reference_gops\n", 0) == 0);

  std::ostringstream rout;
  REQUIRE(cli::cmd_report(d.path, rout, err) == cli::kOk);
  CHECK(rout.str().find("9/9 reference cells within 10%") != std::string::npos);

  TempDir empty("empty");
  std::ostringstream eout;
  CHECK(cli::cmd_report(empty.path, eout, err) == cli::kOk);
  CHECK(eout.str().find("nothing to report") != std::string::npos);

  std::ostringstream sink;
  CHECK(cli::guarded([&] { return cli::cmd_report(d.path / "absent", sink, sink); }, sink) ==
        cli::kInvalid);

  // a corrupt trace reports the byte position
  std::ofstream(d.path / "bad.zst", std::ios::binary) << "ZSSTRACE\x01";
  cli::SimulateRequest bad;
  bad.out_dir = d.path / "bad";
  bad.trace = d.path / "bad.zst";
  bad.task = TaskKind::kCharLm;
  std::ostringstream berr;
  CHECK(cli::guarded([&] { return cli::cmd_simulate(bad, sink, sink); }, berr) ==
        cli::kRuntimeFailure);
  CHECK(berr.str().find("at byte") != std::string::npos);
}
