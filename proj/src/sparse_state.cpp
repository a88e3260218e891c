// SPDX-License-Identifier: Apache-2.0
#include "zss/sparse_state.hpp"

#include <stdexcept>
#include <string>

namespace zss {

BatchedState::BatchedState(int d_h_, int lanes_)
    : d_h(d_h_), lanes(lanes_),
      values(static_cast<std::size_t>(d_h_) * lanes_, 0.0) {
  if (d_h_ < 0 || lanes_ < 1) {
    throw std::invalid_argument("BatchedState: need d_h >= 0 and lanes >= 1");
  }
}

BatchedState::BatchedState(int d_h_, int lanes_, std::vector<double> v)
    : BatchedState(d_h_, lanes_) {
  if (v.size() != values.size()) {
    throw std::invalid_argument("BatchedState: expected " +
                                std::to_string(values.size()) +
                                " values, got " + std::to_string(v.size()));
  }
  values = std::move(v);
}

bool SparseStateVector::is_escape(std::size_t group) const {
  for (int b = 0; b < lanes; ++b) {
    if (group_values[group * lanes + b] != 0.0) return false;
  }
  return true;
}

std::size_t SparseStateVector::compute_group_count() const {
  std::size_t n = 0;
  for (std::size_t g = 0; g < group_count(); ++g) {
    if (!is_escape(g)) ++n;
  }
  return n;
}

std::vector<int> SparseStateVector::active_positions() const {
  std::vector<int> out;
  out.reserve(group_count());
  int pos = -1;
  for (std::size_t g = 0; g < group_count(); ++g) {
    pos += static_cast<int>(offsets[g]) + 1;
    if (!is_escape(g)) out.push_back(pos);
  }
  return out;
}

std::vector<bool> skip_mask(const BatchedState& state) {
  std::vector<bool> mask(state.d_h, true);
  for (int b = 0; b < state.lanes; ++b) {
    for (int j = 0; j < state.d_h; ++j) {
      if (state.at(b, j) != 0.0) mask[j] = false;
    }
  }
  return mask;
}

SparseStateVector encode(const BatchedState& state, int counter_width) {
  if (counter_width < 1 || counter_width > 16) {
    throw std::invalid_argument("encode: counter width must lie in [1, 16]");
  }
  SparseStateVector sv;
  sv.original_length = state.d_h;
  sv.lanes = state.lanes;
  sv.counter_width = counter_width;
  const std::uint32_t max_offset = sv.max_offset();

  const std::vector<bool> mask = skip_mask(state);
  std::uint32_t run = 0;
  for (int j = 0; j < state.d_h; ++j) {
    if (mask[j]) {
      if (run == max_offset) {
        // Counter saturated and this position is zero too: escape.
        sv.offsets.push_back(max_offset);
        sv.group_values.insert(sv.group_values.end(), state.lanes, 0.0);
        run = 0;
      } else {
        ++run;
      }
      continue;
    }
    sv.offsets.push_back(run);
    for (int b = 0; b < state.lanes; ++b) {
      sv.group_values.push_back(state.at(b, j));
    }
    run = 0;
  }
  return sv;
}

BatchedState decode(const SparseStateVector& sv) {
  if (sv.lanes < 1 || sv.original_length < 0) {
    throw std::invalid_argument("decode: bad header");
  }
  if (sv.group_values.size() != sv.offsets.size() * sv.lanes) {
    throw std::invalid_argument("decode: value count does not match groups");
  }
  BatchedState out(sv.original_length, sv.lanes);
  long pos = -1;
  for (std::size_t g = 0; g < sv.group_count(); ++g) {
    const std::uint32_t off = sv.offsets[g];
    if (off > sv.max_offset()) {
      throw std::invalid_argument("decode: group " + std::to_string(g) +
                                  " offset " + std::to_string(off) +
                                  " exceeds counter width");
    }
    pos += static_cast<long>(off) + 1;
    if (pos >= sv.original_length) {
      throw std::invalid_argument("decode: group " + std::to_string(g) +
                                  " runs past position " +
                                  std::to_string(sv.original_length));
    }
    const bool escape = sv.is_escape(g);
    if (escape && off != sv.max_offset()) {
      throw std::invalid_argument("decode: all-zero group " +
                                  std::to_string(g) +
                                  " is not a saturated escape");
    }
    if (escape) continue;
    for (int b = 0; b < sv.lanes; ++b) {
      out.at(b, static_cast<int>(pos)) = sv.group_values[g * sv.lanes + b];
    }
  }
  return out;
}

double effective_sparsity(const BatchedState& state) {
  if (state.d_h == 0) return 0.0;
  std::size_t zeros = 0;
  for (bool m : skip_mask(state)) zeros += m ? 1 : 0;
  return 100.0 * static_cast<double>(zeros) / state.d_h;
}

}  // namespace zss
