// SPDX-License-Identifier: Apache-2.0
#include "zss/checkpoint.hpp"

#include "zss/config.hpp"
#include "zss/numerics.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace zss {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'Z', 'S', 'S', 'C', 'K', 'P', 'T', '\0'};

struct NamedTensor {
  std::string name;
  Matrix* value;
};

std::vector<NamedTensor> tensors(Model& m, Matrix& b, Matrix& b_out) {
  std::vector<NamedTensor> t = {{"lstm.w_h", &m.lstm.w_h},
                                {"lstm.w_x", &m.lstm.w_x},
                                {"lstm.b", &b},
                                {"out.w", &m.w_out},
                                {"out.b", &b_out}};
  if (m.embedding.size() > 0) t.push_back({"embedding", &m.embedding});
  return t;
}

// Row-major copy of an Eigen (column-major) matrix.
std::vector<double> row_major(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
  }
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  Model m = ckpt.model;
  m.lstm.validate();
  Matrix b = m.lstm.b;
  Matrix b_out = m.b_out;
  const int bits = ckpt.config.quant_bits;

  Json header;
  header["format"] = "zss-checkpoint";
  header["task"] = to_json(ckpt.config);
  header["seed"] = ckpt.seed;
  header["d_x"] = m.lstm.d_x;
  header["d_h"] = m.lstm.d_h;
  header["gate_order"] = "fiog";
  header["threshold"] = ckpt.config.threshold;
  header["quant_bits"] = bits;
  header["vocab_size"] = ckpt.vocab_size;

  std::string payload;
  Json entries = Json::array();
  for (const auto& t : tensors(m, b, b_out)) {
    const auto values = row_major(*t.value);
    Json e;
    e["name"] = t.name;
    e["shape"] = {t.value->rows(), t.value->cols()};
    e["f64"] = payload.size();
    payload.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
    if (values.empty()) {
      e["int8"] = payload.size();
      e["scale"] = 1.0;
    } else {
      const auto q = quantize(RealTensor(values, {values.size()}), bits);
      e["int8"] = payload.size();
      e["scale"] = q.scale;
      payload.append(reinterpret_cast<const char*>(q.data.data()), q.data.size());
    }
    entries.push_back(e);
  }
  header["tensors"] = entries;
  header["payload_bytes"] = payload.size();

  const std::string text = header.dump(2);
  const auto length = static_cast<std::uint32_t>(text.size());
  const std::uint32_t version = kCheckpointVersion;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&length), 4);
  os << text << payload;
  if (!os) throw CheckpointError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string bytes = buf.str();
  const std::string where = path.string() + ": ";

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError(where + "not a checkpoint (bad magic at byte 0)");
  }
  std::uint32_t version = 0, length = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&length, bytes.data() + 12, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(where + "unsupported version " + std::to_string(version));
  }
  if (bytes.size() < 16ull + length) throw CheckpointError(where + "truncated header");

  Json h;
  try {
    h = Json::parse(bytes.substr(16, length));
  } catch (const Json::exception& e) {
    throw CheckpointError(where + "bad header: " + e.what());
  }
  const std::size_t base = 16ull + length;
  const std::size_t payload = bytes.size() - base;

  Checkpoint ck;
  try {
    std::vector<std::string> errors;
    ck.config = task_config_from_json(h.at("task"), TaskConfig{}, errors);
    if (!errors.empty()) throw ConfigError(errors);
    ck.seed = h.at("seed").get<std::uint64_t>();
    ck.vocab_size = h.at("vocab_size").get<int>();
    if (h.at("gate_order").get<std::string>() != "fiog") {
      throw CheckpointError(where + "unsupported gate order");
    }
    if (h.at("payload_bytes").get<std::size_t>() != payload) {
      throw CheckpointError(where + "payload is " + std::to_string(payload) + " bytes, header says " +
                            h.at("payload_bytes").dump());
    }
    ck.model.lstm.d_x = h.at("d_x").get<int>();
    ck.model.lstm.d_h = h.at("d_h").get<int>();
    Matrix b, b_out;
    auto slots = tensors(ck.model, b, b_out);
    bool has_embedding = false;
    for (const auto& e : h.at("tensors")) {
      const auto name = e.at("name").get<std::string>();
      Matrix* target = nullptr;
      if (name == "embedding") {
        has_embedding = true;
        target = &ck.model.embedding;
      }
      for (const auto& s : slots) {
        if (s.name == name) target = s.value;
      }
      if (!target) throw CheckpointError(where + "unknown tensor " + name);
      const auto rows = e.at("shape").at(0).get<Eigen::Index>();
      const auto cols = e.at("shape").at(1).get<Eigen::Index>();
      const auto off = e.at("f64").get<std::size_t>();
      const std::size_t n = static_cast<std::size_t>(rows * cols);
      if (rows < 0 || cols < 0 || off > payload || n * sizeof(double) > payload - off) {
        throw CheckpointError(where + "tensor " + name + " lies outside the payload");
      }
      std::vector<double> values(n);
      std::memcpy(values.data(), bytes.data() + base + off, n * sizeof(double));
      target->resize(rows, cols);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) (*target)(r, c) = values[k++];
      }
    }
    if (ck.config.task == TaskKind::kWordLm && !has_embedding) {
      throw CheckpointError(where + "word model without an embedding tensor");
    }
    ck.model.lstm.b = b.reshaped();
    ck.model.b_out = b_out.reshaped();
    ck.model.lstm.validate();
    if (ck.model.w_out.cols() != ck.model.lstm.d_h || ck.model.b_out.size() != ck.model.w_out.rows()) {
      throw CheckpointError(where + "output layer shape does not match d_h");
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(where + "bad header: " + e.what());
  }
  return ck;
}

}  // namespace zss
