// SPDX-License-Identifier: Apache-2.0
/**
 * @file   checkpoint.hpp
 * @brief  Trained-model files.
 *
 * Layout (integers and floats little-endian):
 *
 *   offset  size  field
 *   0       8     magic "ZSSCKPT\0"
 *   8       4     u32 version (= 1)
 *   12      4     u32 header length H
 *   16      H     UTF-8 JSON header
 *   16+H    ...   payload
 *
 * Header keys: "task" (task config), "seed", "d_x", "d_h", "gate_order"
 * ("fiog": gate blocks stacked along rows), "threshold", "quant_bits",
 * "vocab_size" and "tensors". Each tensor entry names a row-major
 * [rows, cols] array and gives two payload-relative byte offsets: "f64"
 * (master weights) and "int8" (the quantized copy with "scale").
 *
 * Tensors: lstm.w_h [4d_h x d_h], lstm.w_x [4d_h x d_x], lstm.b [4d_h x 1],
 * out.w [classes x d_h], out.b [classes x 1] and, for word models,
 * embedding [E x V].
 */
#pragma once

#include "zss/training.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>

namespace zss {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  TaskConfig config;
  std::uint64_t seed = 0;
  int vocab_size = 0;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws CheckpointError on a bad magic, version, header or payload size.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace zss
