// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trace_io.hpp
 * @brief  Serialized sparse-state traces (format version 1).
 *
 * All integers little-endian.
 *
 *   offset  size  field
 *   0       8     magic "ZSSTRACE"
 *   8       4     u32 version (= 1)
 *   12      4     u32 d_h
 *   16      4     u32 lanes (B)
 *   20      4     u32 counter width in bits
 *   24      8     f64 scale (lane value = int8 * scale)
 *   32      4     u32 step count
 *   36      ...   steps
 *
 * Each step: u32 group count, then per group one u8 offset followed by B
 * int8 lane values. A group whose lane values are all zero is an escape and
 * must carry the saturated offset.
 */
#pragma once

#include "zss/sparse_state.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace zss {

inline constexpr std::uint32_t kTraceVersion = 1;

struct StateTrace {
  int d_h = 0;
  int lanes = 1;
  int counter_width = kDefaultCounterWidth;
  double scale = 1.0 / 127.0;
  std::vector<SparseStateVector> steps;
};

/// Raised by the reader; offset() is the byte position of the failure.
class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

void write_trace(std::ostream& os, const StateTrace& trace);
void write_trace(const std::filesystem::path& path, const StateTrace& trace);
StateTrace read_trace(std::istream& is);
StateTrace read_trace(const std::filesystem::path& path);

}  // namespace zss
