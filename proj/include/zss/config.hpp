// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Experiment manifests and the JSON form of task/accelerator configs.
 *
 * Manifest schema (all keys optional unless marked):
 *
 *   {
 *     "id": "desk-char",                 required, [A-Za-z0-9_.-]+
 *     "seed": 7,
 *     "output_dir": "out",               results go to <output_dir>/<id>
 *     "data_dir": "tests/data/ptb_char_tiny",
 *     "task": { "preset": "desk_char", <TaskConfig field overrides> },
 *     "thresholds": [0.0, 0.5, 0.9],     sweep thresholds, ascending
 *     "batch_sizes": [1, 8, 16],
 *     "accelerator": { <AcceleratorConfig field overrides> },
 *     "trace": { "checkpoint": "...", "steps": 100, "split": "test" }
 *   }
 *
 * Relative paths are resolved against the manifest's directory. Without
 * "data_dir" the loaders look in $ZSS_DATA_DIR/ptb (char, word) or
 * $ZSS_DATA_DIR/mnist.
 */
#pragma once

#include "zss/accel_sim.hpp"
#include "zss/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace zss {

using Json = nlohmann::ordered_json;

/// Validation failure. what() lists every problem, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

inline constexpr const char* kDataDirEnv = "ZSS_DATA_DIR";

struct TraceSettings {
  std::filesystem::path checkpoint;  // empty: <output_dir>/<id>/checkpoint.zck
  int steps = 100;
  bool use_test = true;  // false: validation split
};

struct ExperimentManifest {
  std::string id;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path data_dir;  // resolved; empty means "not given"
  TaskConfig task;
  std::vector<double> thresholds;
  std::vector<int> batch_sizes = {1, 8, 16};
  AcceleratorConfig accelerator;
  TraceSettings trace;

  std::filesystem::path run_dir() const { return output_dir / id; }
  /// data_dir, or the ZSS_DATA_DIR default for the task.
  std::filesystem::path resolved_data_dir() const;
};

TaskConfig task_preset(const std::string& name);
std::vector<std::string> task_preset_names();

Json to_json(const TaskConfig& config);
Json to_json(const AcceleratorConfig& config);

/// Applies the keys of @p j on top of @p base. Unknown keys and type errors
/// are appended to @p errors (prefixed with @p where).
TaskConfig task_config_from_json(const Json& j, TaskConfig base,
                                 std::vector<std::string>& errors,
                                 const std::string& where = "task");
AcceleratorConfig accelerator_config_from_json(const Json& j, AcceleratorConfig base,
                                               std::vector<std::string>& errors,
                                               const std::string& where = "accelerator");

/// Parses and validates; throws ConfigError listing every problem found.
ExperimentManifest parse_manifest(const Json& j,
                                  const std::filesystem::path& base_dir = {});
ExperimentManifest load_manifest(const std::filesystem::path& file);

/// Loads the datasets a task needs from @p dir.
TaskData load_task_data(const TaskConfig& config, const std::filesystem::path& dir);

}  // namespace zss
