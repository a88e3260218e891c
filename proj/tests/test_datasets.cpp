// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "zss/datasets.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

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

void write(const fs::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  os << bytes;
}

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
          static_cast<char>(v)};
}

std::optional<fs::path> real_data(const char* sub) {
  const char* root = std::getenv("ZSS_DATA_DIR");
  if (!root) return std::nullopt;
  const fs::path p = fs::path(root) / sub;
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

}  // namespace

TEST_CASE("char corpus: tiny raw file") {
  TempDir d("char");
  write(d.path / "ptb.char.train.txt", "abab");
  write(d.path / "ptb.char.valid.txt", "ab");
  write(d.path / "ptb.char.test.txt", "ba");
  const auto c = load_ptb_char(d.path);
  CHECK(c.vocab.size() == 2);
  CHECK(c.train.size() == 4);
  CHECK(c.vocab.token(0) == "a");
  CHECK(c.test == std::vector<int>{1, 0});
}

TEST_CASE("char corpus: fixture format, vocabulary and round trip") {
  const auto c = load_ptb_char(fs::path(ZSS_TEST_DATA_DIR) / "ptb_char_tiny");
  CHECK(c.vocab.size() == 50);
  CHECK(c.vocab.find("<eos>").has_value());
  CHECK(c.vocab.find("_").has_value());
  const auto tokens = c.vocab.decode(c.test);
  CHECK(c.vocab.encode(tokens) == c.test);
}

TEST_CASE("char corpus: missing files name the expected files") {
  TempDir d("missing");
  write(d.path / "ptb.char.train.txt", "a b\n");
  CHECK_THROWS_WITH_AS(load_ptb_char(d.path), doctest::Contains("ptb.char.valid.txt"),
                       DatasetError);
}

TEST_CASE("word corpus: unknown words map to <unk>") {
  TempDir d("word");
  write(d.path / "ptb.train.txt", " the cat sat \n the dog \n");
  write(d.path / "ptb.valid.txt", " the bird \n");
  write(d.path / "ptb.test.txt", " dog \n");
  const auto c = load_ptb_word(d.path);
  const int unk = *c.vocab.find("<unk>");
  CHECK(c.valid == std::vector<int>{*c.vocab.find("the"), unk, *c.vocab.find("<eos>")});
  CHECK(c.vocab.decode(c.train).size() == c.train.size());
  CHECK(c.vocab.encode(c.vocab.decode(c.test)) == c.test);

  const auto f = load_ptb_word(fs::path(ZSS_TEST_DATA_DIR) / "ptb_word_tiny");
  CHECK(f.vocab.size() > 100);
  CHECK(std::count(f.valid.begin(), f.valid.end(), *f.vocab.find("<unk>")) > 0);
}

TEST_CASE("IDX: hand-built single image") {
  TempDir d("idx");
  std::string pixels;
  for (int k = 0; k < 6; ++k) pixels.push_back(static_cast<char>(k * 40));
  write(d.path / "img", be32(0x803) + be32(1) + be32(2) + be32(3) + pixels);
  write(d.path / "lbl", be32(0x801) + be32(1) + std::string(1, '\x07'));
  const auto set = load_idx(d.path / "img", d.path / "lbl");
  CHECK(set.count() == 1);
  CHECK(set.rows == 2);
  CHECK(set.cols == 3);
  for (int k = 0; k < 6; ++k) CHECK(set.image(0)[k] == k * 40);
  CHECK(set.normalized(0)[5] == doctest::Approx(200.0 / 255.0));
  CHECK(set.labels[0] == 7);
}

TEST_CASE("IDX: errors carry the byte offset") {
  TempDir d("idxbad");
  // little-endian magic: caught by the magic check
  write(d.path / "le", std::string("\x03\x08\x00\x00", 4) + be32(1) + be32(1) + be32(1) + "x");
  CHECK_THROWS_WITH_AS(load_idx(d.path / "le", d.path / "le"), doctest::Contains("byte 0"),
                       DatasetError);
  int n = 0, r = 0, c = 0;
  write(d.path / "short", be32(0x803) + be32(2) + be32(2) + be32(2) + "abc");
  CHECK_THROWS_WITH_AS(read_idx_images(d.path / "short", n, r, c),
                       doctest::Contains("truncated"), DatasetError);
  write(d.path / "hdr", be32(0x803) + be32(2));
  CHECK_THROWS_WITH_AS(read_idx_images(d.path / "hdr", n, r, c), doctest::Contains("byte 8"),
                       DatasetError);
  write(d.path / "lbl", be32(0x801) + be32(1) + std::string(1, '\x0b'));
  CHECK_THROWS_WITH_AS(read_idx_labels(d.path / "lbl"), doctest::Contains("byte 8"),
                       DatasetError);
}

TEST_CASE("IDX: fixture set") {
  const auto m = load_mnist(fs::path(ZSS_TEST_DATA_DIR) / "mnist_tiny");
  CHECK(m.train.count() == 600);
  CHECK(m.test.count() == 200);
  CHECK(m.test.rows == 28);
  std::set<int> classes(m.test.labels.begin(), m.test.labels.end());
  CHECK(classes.size() == 10);
  CHECK(load_mnist(fs::path(ZSS_TEST_DATA_DIR) / "mnist_tiny", 100).train.count() == 100);
}

TEST_CASE("scanline ordering") {
  std::vector<double> img(28 * 28, 0.0);
  img[0] = 1.0;
  CHECK(to_scanline_sequence(img)[0] == 1.0);
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> grid(28, std::vector<double>(28));
    std::vector<double> flat;
    for (auto& row : grid) {
      for (auto& v : row) v = std::uniform_real_distribution<double>(0, 1)(rng);
    }
    for (const auto& row : grid) flat.insert(flat.end(), row.begin(), row.end());
    const auto seq = to_scanline_sequence(flat);
    REQUIRE(seq.size() == 784);
    for (int r = 0; r < 28; ++r) {
      for (int c = 0; c < 28; ++c) REQUIRE(seq[28 * r + c] == grid[r][c]);
    }
  }
  CHECK_THROWS_AS(to_scanline_sequence(std::vector<double>(10)), std::invalid_argument);
}

TEST_CASE("batch_stream: contiguous partition") {
  std::vector<int> s(9);
  for (int k = 0; k < 9; ++k) s[k] = k;
  const auto batches = batch_stream(s, 2, 2);
  REQUIRE(batches.size() == 2);
  std::multiset<int> seen;
  for (const auto& b : batches) {
    for (int v : b.inputs) seen.insert(v);
    for (int lane = 0; lane < 2; ++lane) {
      for (int t = 0; t < 2; ++t) CHECK(b.target(lane, t) == b.input(lane, t) + 1);
    }
  }
  CHECK(seen == std::multiset<int>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(batches[0].reset_state);
  CHECK_FALSE(batches[1].reset_state);
  // lane 0 continues across batches
  CHECK(batches[1].input(0, 0) == batches[0].input(0, 1) + 1);

  const auto single = batch_stream(s, 1, 4);
  CHECK(single[0].inputs == std::vector<int>{0, 1, 2, 3});
  CHECK(single[1].inputs == std::vector<int>{4, 5, 6, 7});

  CHECK_THROWS_AS(batch_stream(s, 3, 3), std::invalid_argument);
}

TEST_CASE("batch_stream: no duplication on random streams") {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 1 + static_cast<int>(rng() % 8), t = 1 + static_cast<int>(rng() % 10);
    const int n = b * t + 1 + static_cast<int>(rng() % 200);
    std::vector<int> s(n);
    for (int k = 0; k < n; ++k) s[k] = k;
    std::set<int> seen;
    std::size_t count = 0;
    for (const auto& sb : batch_stream(s, b, t)) {
      for (int v : sb.inputs) seen.insert(v);
      count += sb.inputs.size();
    }
    REQUIRE(seen.size() == count);
    const std::size_t lane = (n - 1) / b;
    REQUIRE(count == b * (lane / t) * t);
  }
}

TEST_CASE("full corpora when available") {
  if (auto dir = real_data("ptb")) {
    const auto c = load_ptb_char(*dir);
    CHECK(c.vocab.size() == 50);
    CHECK(c.train.size() == doctest::Approx(5017e3).epsilon(0.01));
    CHECK(c.valid.size() == doctest::Approx(393e3).epsilon(0.01));
    CHECK(c.test.size() == doctest::Approx(442e3).epsilon(0.01));
    const auto w = load_ptb_word(*dir);
    CHECK(w.vocab.size() == 10000);
    CHECK(w.train.size() == doctest::Approx(929e3).epsilon(0.01));
    CHECK(w.valid.size() == doctest::Approx(73e3).epsilon(0.01));
    CHECK(w.test.size() == doctest::Approx(82e3).epsilon(0.01));
  } else {
    MESSAGE("ZSS_DATA_DIR/ptb not present; full PTB checks not run");
  }
  if (auto dir = real_data("mnist")) {
    const auto m = load_mnist(*dir);
    CHECK(m.train.count() == 60000);
    CHECK(m.test.count() == 10000);
    CHECK(m.test.rows == 28);
    CHECK(m.test.cols == 28);
    std::set<int> classes(m.test.labels.begin(), m.test.labels.end());
    CHECK(classes.size() == 10);
  } else {
    MESSAGE("ZSS_DATA_DIR/mnist not present; full MNIST checks not run");
  }
}
