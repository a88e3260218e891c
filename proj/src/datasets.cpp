// SPDX-License-Identifier: Apache-2.0
#include "zss/datasets.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <sstream>

namespace zss {

namespace fs = std::filesystem;

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::optional<int> Vocabulary::find(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto id = find(t);
    if (!id) throw DatasetError("token '" + t + "' is not in the vocabulary");
    ids.push_back(*id);
  }
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

namespace {

std::string read_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DatasetError("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool is_spaced_char_format(const std::string& text) {
  std::istringstream is(text);
  std::string tok;
  bool any_space = text.find(' ') != std::string::npos;
  if (!any_space) return false;
  while (is >> tok) {
    if (tok.size() != 1) return false;
  }
  return true;
}

void require_files(const fs::path& dir, std::initializer_list<const char*> names) {
  std::string missing;
  for (const char* n : names) {
    if (!fs::exists(dir / n)) missing += std::string(missing.empty() ? "" : ", ") + n;
  }
  if (!missing.empty()) {
    throw DatasetError("dataset directory " + dir.string() +
                       " is missing: " + missing +
                       " (set the path in the config or ZSS_DATA_DIR)");
  }
}

std::uint32_t read_be32(const std::string& bytes, std::size_t at,
                        const fs::path& file) {
  if (at + 4 > bytes.size()) {
    throw DatasetError(file.string() + ": truncated header at byte " +
                       std::to_string(at));
  }
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(bytes[at + i]);
  }
  return v;
}

}  // namespace

std::vector<std::string> read_char_tokens(const fs::path& file) {
  const std::string text = read_file(file);
  std::vector<std::string> out;
  if (is_spaced_char_format(text)) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      std::istringstream ls(line);
      std::string tok;
      bool any = false;
      while (ls >> tok) {
        out.push_back(tok);
        any = true;
      }
      if (any) out.emplace_back(kEosToken);
    }
    return out;
  }
  out.reserve(text.size());
  for (char c : text) out.emplace_back(1, c);
  return out;
}

std::vector<std::string> read_word_tokens(const fs::path& file) {
  const std::string text = read_file(file);
  std::vector<std::string> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    std::string tok;
    bool any = false;
    while (ls >> tok) {
      out.push_back(tok);
      any = true;
    }
    if (any) out.emplace_back(kEosToken);
  }
  return out;
}

TokenCorpus load_ptb_char(const fs::path& dir) {
  require_files(dir, {"ptb.char.train.txt", "ptb.char.valid.txt", "ptb.char.test.txt"});
  TokenCorpus corpus;
  auto ingest = [&](const char* name, std::vector<int>& ids) {
    for (const auto& t : read_char_tokens(dir / name)) ids.push_back(corpus.vocab.add(t));
  };
  ingest("ptb.char.train.txt", corpus.train);
  ingest("ptb.char.valid.txt", corpus.valid);
  ingest("ptb.char.test.txt", corpus.test);
  return corpus;
}

TokenCorpus load_ptb_word(const fs::path& dir) {
  require_files(dir, {"ptb.train.txt", "ptb.valid.txt", "ptb.test.txt"});
  TokenCorpus corpus;
  for (const auto& t : read_word_tokens(dir / "ptb.train.txt")) {
    corpus.train.push_back(corpus.vocab.add(t));
  }
  const int unk = corpus.vocab.add(kUnkToken);
  auto map_split = [&](const char* name, std::vector<int>& ids) {
    for (const auto& t : read_word_tokens(dir / name)) {
      ids.push_back(corpus.vocab.find(t).value_or(unk));
    }
  };
  map_split("ptb.valid.txt", corpus.valid);
  map_split("ptb.test.txt", corpus.test);
  return corpus;
}

std::span<const std::uint8_t> ImageSet::image(int i) const {
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  return std::span<const std::uint8_t>(pixels).subspan(static_cast<std::size_t>(i) * n, n);
}

std::vector<double> ImageSet::normalized(int i) const {
  const auto img = image(i);
  std::vector<double> out(img.size());
  for (std::size_t k = 0; k < img.size(); ++k) out[k] = img[k] / 255.0;
  return out;
}

std::vector<std::uint8_t> read_idx_images(const fs::path& file, int& count,
                                          int& rows, int& cols) {
  const std::string bytes = read_file(file);
  const std::uint32_t magic = read_be32(bytes, 0, file);
  if (magic != 0x00000803u) {
    std::ostringstream os;
    os << file.string() << ": bad image magic 0x" << std::hex << magic
       << " at byte 0 (expected 0x00000803)";
    throw DatasetError(os.str());
  }
  count = static_cast<int>(read_be32(bytes, 4, file));
  rows = static_cast<int>(read_be32(bytes, 8, file));
  cols = static_cast<int>(read_be32(bytes, 12, file));
  if (rows <= 0 || cols <= 0) {
    throw DatasetError(file.string() + ": bad image dimensions at byte 8");
  }
  const std::size_t need = static_cast<std::size_t>(count) * rows * cols;
  if (bytes.size() - 16 < need) {
    throw DatasetError(file.string() + ": pixel data truncated at byte " +
                       std::to_string(bytes.size()) + " (need " +
                       std::to_string(16 + need) + ")");
  }
  return {bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need)};
}

std::vector<std::uint8_t> read_idx_labels(const fs::path& file) {
  const std::string bytes = read_file(file);
  const std::uint32_t magic = read_be32(bytes, 0, file);
  if (magic != 0x00000801u) {
    std::ostringstream os;
    os << file.string() << ": bad label magic 0x" << std::hex << magic
       << " at byte 0 (expected 0x00000801)";
    throw DatasetError(os.str());
  }
  const std::uint32_t count = read_be32(bytes, 4, file);
  if (bytes.size() - 8 < count) {
    throw DatasetError(file.string() + ": label data truncated at byte " +
                       std::to_string(bytes.size()));
  }
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.begin() + 8 + count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) {
      throw DatasetError(file.string() + ": label out of range at byte " +
                         std::to_string(8 + i));
    }
  }
  return labels;
}

ImageSet load_idx(const fs::path& images, const fs::path& labels) {
  ImageSet set;
  int count = 0;
  set.pixels = read_idx_images(images, count, set.rows, set.cols);
  set.labels = read_idx_labels(labels);
  if (static_cast<int>(set.labels.size()) != count) {
    throw DatasetError(images.string() + " holds " + std::to_string(count) +
                       " images but " + labels.string() + " holds " +
                       std::to_string(set.labels.size()) + " labels");
  }
  return set;
}

MnistData load_mnist(const fs::path& dir, int train_limit) {
  require_files(dir, {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                      "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"});
  MnistData d;
  d.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  d.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  if (train_limit > 0 && train_limit < d.train.count()) {
    d.train.labels.resize(train_limit);
    d.train.pixels.resize(static_cast<std::size_t>(train_limit) * d.train.rows * d.train.cols);
  }
  return d;
}

std::vector<double> to_scanline_sequence(std::span<const double> image, int rows,
                                         int cols) {
  if (image.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("to_scanline_sequence: image is not rows x cols");
  }
  return {image.begin(), image.end()};
}

std::vector<SequenceBatch> batch_stream(std::span<const int> stream,
                                        int batch_size, int sequence_length) {
  if (batch_size < 1 || sequence_length < 1) {
    throw std::invalid_argument("batch_stream: batch size and length must be >= 1");
  }
  const std::size_t window = static_cast<std::size_t>(batch_size) * sequence_length;
  if (stream.size() < window + 1) {
    throw std::invalid_argument(
        "batch_stream: stream of " + std::to_string(stream.size()) +
        " tokens is shorter than batch*length+1 = " + std::to_string(window + 1));
  }
  const std::size_t lane_len = (stream.size() - 1) / batch_size;
  const std::size_t windows = lane_len / sequence_length;

  std::vector<SequenceBatch> out;
  out.reserve(windows);
  for (std::size_t k = 0; k < windows; ++k) {
    SequenceBatch sb;
    sb.batch = batch_size;
    sb.length = sequence_length;
    sb.reset_state = k == 0;
    sb.inputs.resize(window);
    sb.targets.resize(window);
    for (int b = 0; b < batch_size; ++b) {
      const std::size_t base = b * lane_len + k * sequence_length;
      for (int t = 0; t < sequence_length; ++t) {
        sb.inputs[static_cast<std::size_t>(b) * sequence_length + t] = stream[base + t];
        sb.targets[static_cast<std::size_t>(b) * sequence_length + t] = stream[base + t + 1];
      }
    }
    out.push_back(std::move(sb));
  }
  return out;
}

}  // namespace zss
