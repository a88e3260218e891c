// SPDX-License-Identifier: Apache-2.0
/**
 * @file   datasets.hpp
 * @brief  Penn Treebank (character and word) and MNIST ingestion, batching.
 *
 * Expected file names inside the dataset directory:
 *   ptb.char.train.txt ptb.char.valid.txt ptb.char.test.txt
 *   ptb.train.txt      ptb.valid.txt      ptb.test.txt
 *   train-images-idx3-ubyte train-labels-idx1-ubyte
 *   t10k-images-idx3-ubyte  t10k-labels-idx1-ubyte
 *
 * None of these are downloaded; see the README for sources.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace zss {

inline constexpr const char* kEosToken = "<eos>";
inline constexpr const char* kUnkToken = "<unk>";

class Vocabulary {
 public:
  /// Returns the id of @p token, inserting it if new.
  int add(const std::string& token);
  std::optional<int> find(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
};

struct TokenCorpus {
  std::vector<int> train;
  std::vector<int> valid;
  std::vector<int> test;
  Vocabulary vocab;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Character stream of one file. Files whose lines are single characters
/// separated by spaces (the usual PTB character release) are read symbol by
/// symbol with an <eos> per line; anything else is read verbatim, one token
/// per byte (newlines included).
std::vector<std::string> read_char_tokens(const std::filesystem::path& file);

/// Whitespace-separated words with an <eos> per line.
std::vector<std::string> read_word_tokens(const std::filesystem::path& file);

/// Vocabulary in first-occurrence order over train, then valid, then test.
TokenCorpus load_ptb_char(const std::filesystem::path& dir);

/// Vocabulary from the training split in first-occurrence order; unseen
/// words in valid/test map to <unk>.
TokenCorpus load_ptb_word(const std::filesystem::path& dir);

struct ImageSet {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // image-major, row-major within image
  std::vector<std::uint8_t> labels;

  int count() const { return static_cast<int>(labels.size()); }
  std::span<const std::uint8_t> image(int i) const;
  /// Pixels of image @p i scaled to [0, 1].
  std::vector<double> normalized(int i) const;
};

struct MnistData {
  ImageSet train;
  ImageSet test;
};

/// Big-endian IDX parsing; errors name the byte offset of the failure.
ImageSet load_idx(const std::filesystem::path& images,
                  const std::filesystem::path& labels);
std::vector<std::uint8_t> read_idx_images(const std::filesystem::path& file,
                                          int& count, int& rows, int& cols);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& file);

/// @p train_limit truncates the training split (0 keeps everything).
MnistData load_mnist(const std::filesystem::path& dir, int train_limit = 0);

/// Row-major flattening: pixel (r, c) lands at index r*cols + c.
std::vector<double> to_scanline_sequence(std::span<const double> image,
                                         int rows = 28, int cols = 28);

struct SequenceBatch {
  int batch = 0;
  int length = 0;
  std::vector<int> inputs;   // [batch x length], lane-major
  std::vector<int> targets;  // inputs shifted by one within the stream
  bool reset_state = false;  // first batch of a pass: start from zero state

  int input(int lane, int t) const { return inputs[static_cast<std::size_t>(lane) * length + t]; }
  int target(int lane, int t) const { return targets[static_cast<std::size_t>(lane) * length + t]; }
};

/// Contiguous-chunk batching. The stream (minus its final token, which can
/// only be a target) is split into @p batch_size equal lanes; window k of
/// every lane forms batch k. Tail tokens that do not fill a whole window are
/// dropped. Requires at least batch_size * sequence_length + 1 tokens.
std::vector<SequenceBatch> batch_stream(std::span<const int> stream,
                                        int batch_size, int sequence_length);

}  // namespace zss
