// SPDX-License-Identifier: Apache-2.0
#include "zss/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <regex>

namespace zss {
namespace fs = std::filesystem;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  return msg;
}

// Typed reader for one JSON value; records a message instead of throwing.
template <typename T>
bool read_as(const Json& v, T& out, const std::string& key, std::vector<std::string>& errors) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("expected a string");
    }
    out = v.get<T>();
    return true;
  } catch (const std::exception& e) {
    errors.push_back(key + ": " + e.what() + " (got " + v.dump() + ")");
    return false;
  }
}

using Setter = std::function<void(const Json&, const std::string&, std::vector<std::string>&)>;

template <typename T>
Setter bind(T& field) {
  return [&field](const Json& v, const std::string& key, std::vector<std::string>& errors) {
    read_as(v, field, key, errors);
  };
}

template <typename T>
Setter bind_optional(std::optional<T>& field) {
  return [&field](const Json& v, const std::string& key, std::vector<std::string>& errors) {
    if (v.is_null()) {
      field.reset();
      return;
    }
    T value{};
    if (read_as(v, value, key, errors)) field = value;
  };
}

void apply(const Json& j, const std::map<std::string, Setter>& fields, const std::string& where,
           std::vector<std::string>& errors, const std::vector<std::string>& ignored = {}) {
  if (!j.is_object()) {
    errors.push_back(where + ": expected an object");
    return;
  }
  for (const auto& [key, value] : j.items()) {
    const std::string path = where + "." + key;
    if (std::find(ignored.begin(), ignored.end(), key) != ignored.end()) continue;
    auto it = fields.find(key);
    if (it == fields.end()) {
      errors.push_back(path + ": unknown key");
      continue;
    }
    it->second(value, path, errors);
  }
}

const std::map<std::string, TaskConfig (*)()>& presets() {
  static const std::map<std::string, TaskConfig (*)()> table = {
      {"full_char", &TaskConfig::full_char}, {"full_word", &TaskConfig::full_word},
      {"full_mnist", &TaskConfig::full_mnist}, {"desk_char", &TaskConfig::desk_char},
      {"desk_word", &TaskConfig::desk_word},   {"desk_mnist", &TaskConfig::desk_mnist},
  };
  return table;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

TaskConfig task_preset(const std::string& name) {
  auto it = presets().find(name);
  if (it == presets().end()) {
    std::string known;
    for (const auto& n : task_preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError({"task.preset: unknown preset '" + name + "' (known: " + known + ")"});
  }
  return it->second();
}

std::vector<std::string> task_preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : presets()) names.push_back(name);
  return names;
}

Json to_json(const TaskConfig& c) {
  Json j;
  j["task"] = to_string(c.task);
  j["d_h"] = c.d_h;
  j["sequence_length"] = c.sequence_length;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["dropout"] = c.dropout_p;
  j["grad_clip_norm"] = c.grad_clip_norm ? Json(*c.grad_clip_norm) : Json(nullptr);
  j["embedding_dim"] = c.embedding_dim ? Json(*c.embedding_dim) : Json(nullptr);
  j["threshold_sweep"] = c.threshold_sweep;
  j["optimizer"] = c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  j["learning_rate"] = c.learning_rate;
  j["lr_decay"] = c.lr_decay;
  j["threshold"] = c.threshold;
  j["quantize"] = c.quantize;
  j["quant_bits"] = c.quant_bits;
  j["max_train_batches"] = c.max_train_batches;
  j["max_eval_batches"] = c.max_eval_batches;
  j["mnist_row_width"] = c.mnist_row_width;
  j["mnist_train_limit"] = c.mnist_train_limit;
  j["mnist_test_limit"] = c.mnist_test_limit;
  j["sweet_spot_tolerance"] = c.sweet_spot_tolerance;
  j["extended"] = c.extended;
  return j;
}

Json to_json(const AcceleratorConfig& c) {
  Json j;
  j["tiles"] = c.tiles;
  j["pes_per_tile"] = c.pes_per_tile;
  j["frequency_hz"] = c.frequency_hz;
  j["weights_per_cycle"] = c.weights_per_cycle;
  j["inputs_per_cycle"] = c.inputs_per_cycle;
  j["scratch_depth"] = c.scratch_depth;
  j["scratch_width_bits"] = c.scratch_width_bits;
  j["weight_bits"] = c.weight_bits;
  j["activation_bits"] = c.activation_bits;
  j["offchip_bandwidth_bps"] = c.offchip_bandwidth_bps;
  j["peak_gops_per_watt"] = c.peak_gops_per_watt;
  return j;
}

TaskConfig task_config_from_json(const Json& j, TaskConfig c, std::vector<std::string>& errors,
                                 const std::string& where) {
  std::string task_name, optimizer;
  bool has_task = false, has_optimizer = false;
  std::map<std::string, Setter> fields = {
      {"d_h", bind(c.d_h)},
      {"sequence_length", bind(c.sequence_length)},
      {"batch_size", bind(c.batch_size)},
      {"epochs", bind(c.epochs)},
      {"dropout", bind(c.dropout_p)},
      {"grad_clip_norm", bind_optional(c.grad_clip_norm)},
      {"embedding_dim", bind_optional(c.embedding_dim)},
      {"threshold_sweep", bind(c.threshold_sweep)},
      {"learning_rate", bind(c.learning_rate)},
      {"lr_decay", bind(c.lr_decay)},
      {"threshold", bind(c.threshold)},
      {"quantize", bind(c.quantize)},
      {"quant_bits", bind(c.quant_bits)},
      {"max_train_batches", bind(c.max_train_batches)},
      {"max_eval_batches", bind(c.max_eval_batches)},
      {"mnist_row_width", bind(c.mnist_row_width)},
      {"mnist_train_limit", bind(c.mnist_train_limit)},
      {"mnist_test_limit", bind(c.mnist_test_limit)},
      {"sweet_spot_tolerance", bind(c.sweet_spot_tolerance)},
      {"extended", bind(c.extended)},
      {"task",
       [&](const Json& v, const std::string& key, std::vector<std::string>& errs) {
         has_task = read_as(v, task_name, key, errs);
       }},
      {"optimizer",
       [&](const Json& v, const std::string& key, std::vector<std::string>& errs) {
         has_optimizer = read_as(v, optimizer, key, errs);
       }},
  };
  apply(j, fields, where, errors, {"preset"});
  if (has_task) {
    try {
      c.task = task_from_string(task_name);
    } catch (const std::exception& e) {
      errors.push_back(where + ".task: " + e.what());
    }
  }
  if (has_optimizer) {
    if (optimizer == "adam") {
      c.optimizer = OptimizerKind::kAdam;
    } else if (optimizer == "sgd") {
      c.optimizer = OptimizerKind::kSgd;
    } else {
      errors.push_back(where + ".optimizer: expected \"adam\" or \"sgd\" (got \"" + optimizer +
                       "\")");
    }
  }
  return c;
}

AcceleratorConfig accelerator_config_from_json(const Json& j, AcceleratorConfig c,
                                               std::vector<std::string>& errors,
                                               const std::string& where) {
  const std::map<std::string, Setter> fields = {
      {"tiles", bind(c.tiles)},
      {"pes_per_tile", bind(c.pes_per_tile)},
      {"frequency_hz", bind(c.frequency_hz)},
      {"weights_per_cycle", bind(c.weights_per_cycle)},
      {"inputs_per_cycle", bind(c.inputs_per_cycle)},
      {"scratch_depth", bind(c.scratch_depth)},
      {"scratch_width_bits", bind(c.scratch_width_bits)},
      {"weight_bits", bind(c.weight_bits)},
      {"activation_bits", bind(c.activation_bits)},
      {"offchip_bandwidth_bps", bind(c.offchip_bandwidth_bps)},
      {"peak_gops_per_watt", bind(c.peak_gops_per_watt)},
  };
  apply(j, fields, where, errors);
  return c;
}

fs::path ExperimentManifest::resolved_data_dir() const {
  if (!data_dir.empty()) return data_dir;
  const char* root = std::getenv(kDataDirEnv);
  if (!root || !*root) return {};
  return fs::path(root) / (task.task == TaskKind::kSeqMnist ? "mnist" : "ptb");
}

ExperimentManifest parse_manifest(const Json& j, const fs::path& base_dir) {
  std::vector<std::string> errors;
  ExperimentManifest m;
  if (!j.is_object()) throw ConfigError({"manifest: expected a JSON object"});

  if (!j.contains("id")) {
    errors.push_back("id: required");
  } else if (read_as(j["id"], m.id, "id", errors)) {
    static const std::regex ok("[A-Za-z0-9_.-]+");
    if (!std::regex_match(m.id, ok) || m.id == "." || m.id == "..") {
      errors.push_back("id: must match [A-Za-z0-9_.-]+ (got \"" + m.id + "\")");
    }
  }

  std::string output_dir, data_dir;
  Json task_json = Json::object(), accel_json = Json::object(), trace_json = Json::object();
  bool has_thresholds = false;
  const std::map<std::string, Setter> fields = {
      {"id", [](const Json&, const std::string&, std::vector<std::string>&) {}},
      {"seed", bind(m.seed)},
      {"output_dir", bind(output_dir)},
      {"data_dir", bind(data_dir)},
      {"task", [&](const Json& v, const std::string&, std::vector<std::string>&) { task_json = v; }},
      {"accelerator",
       [&](const Json& v, const std::string&, std::vector<std::string>&) { accel_json = v; }},
      {"trace", [&](const Json& v, const std::string&, std::vector<std::string>&) { trace_json = v; }},
      {"thresholds",
       [&](const Json& v, const std::string& key, std::vector<std::string>& errs) {
         if (!v.is_array()) {
           errs.push_back(key + ": expected an array of numbers");
           return;
         }
         has_thresholds = read_as(v, m.thresholds, key, errs);
       }},
      {"batch_sizes",
       [&](const Json& v, const std::string& key, std::vector<std::string>& errs) {
         if (!v.is_array()) {
           errs.push_back(key + ": expected an array of integers");
           return;
         }
         read_as(v, m.batch_sizes, key, errs);
       }},
  };
  apply(j, fields, "manifest", errors);
  // "manifest.x" reads oddly for top-level keys
  for (auto& e : errors) {
    if (e.rfind("manifest.", 0) == 0) e.erase(0, 9);
  }

  if (task_json.is_object() && task_json.contains("preset")) {
    if (!task_json["preset"].is_string()) {
      errors.push_back("task.preset: expected a string");
    } else {
      try {
        m.task = task_preset(task_json["preset"].get<std::string>());
      } catch (const ConfigError& e) {
        errors.insert(errors.end(), e.problems().begin(), e.problems().end());
      }
    }
  }
  m.task = task_config_from_json(task_json, m.task, errors);
  for (const auto& e : m.task.validation_errors()) errors.push_back("task." + e);

  m.accelerator = accelerator_config_from_json(accel_json, m.accelerator, errors);
  try {
    m.accelerator.validate();
  } catch (const std::invalid_argument& e) {
    errors.push_back(e.what());
  }

  std::string trace_checkpoint, split = "test";
  const std::map<std::string, Setter> trace_fields = {
      {"checkpoint", bind(trace_checkpoint)},
      {"steps", bind(m.trace.steps)},
      {"split", bind(split)},
  };
  apply(trace_json, trace_fields, "trace", errors);
  if (m.trace.steps < 1) errors.push_back("trace.steps: must be >= 1");
  if (split != "test" && split != "valid") {
    errors.push_back("trace.split: expected \"test\" or \"valid\" (got \"" + split + "\")");
  }
  m.trace.use_test = split == "test";
  m.trace.checkpoint = resolve(trace_checkpoint, base_dir);

  if (!has_thresholds) m.thresholds = m.task.threshold_sweep;
  for (double t : m.thresholds) {
    if (!(t >= 0.0)) errors.push_back("thresholds: values must be non-negative");
  }
  if (!std::is_sorted(m.thresholds.begin(), m.thresholds.end())) {
    errors.push_back("thresholds: must be sorted ascending");
  }
  if (m.batch_sizes.empty()) errors.push_back("batch_sizes: must not be empty");
  for (int b : m.batch_sizes) {
    if (b < 1) errors.push_back("batch_sizes: " + std::to_string(b) + " must be >= 1");
  }

  if (!output_dir.empty()) m.output_dir = output_dir;
  m.output_dir = resolve(m.output_dir, base_dir);
  m.data_dir = resolve(data_dir, base_dir);

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return m;
}

ExperimentManifest load_manifest(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError({"manifest: cannot open " + file.string()});
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError({"manifest: " + file.string() + ": " + e.what()});
  }
  return parse_manifest(j, file.parent_path());
}

TaskData load_task_data(const TaskConfig& config, const fs::path& dir) {
  if (dir.empty()) {
    throw ConfigError({std::string("data_dir: not set and ") + kDataDirEnv +
                       " is not defined"});
  }
  switch (config.task) {
    case TaskKind::kCharLm: return TaskData::from_corpus(load_ptb_char(dir));
    case TaskKind::kWordLm: return TaskData::from_corpus(load_ptb_word(dir));
    case TaskKind::kSeqMnist:
      return TaskData::from_mnist(load_mnist(dir, config.mnist_train_limit));
  }
  return {};
}

}  // namespace zss
