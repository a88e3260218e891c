// SPDX-License-Identifier: Apache-2.0
/**
 * @file   sparse_state.hpp
 * @brief  Batch-aligned zero detection and the offset encoder for pruned
 *         hidden states.
 *
 * A position j of a batched state is skippable only when every lane holds a
 * zero there. The encoder walks positions in order, counting skippable ones;
 * each non-skippable position emits a group (run length since the previous
 * group, lane values). Runs longer than the counter allows are broken by
 * escape groups: offset = 2^w - 1 with all lanes zero, covering 2^w
 * positions and costing no computation.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace zss {

inline constexpr int kDefaultCounterWidth = 4;

struct BatchedState {
  int d_h = 0;
  int lanes = 1;
  std::vector<double> values;  // lane-major: values[b * d_h + j]

  BatchedState() = default;
  BatchedState(int d_h, int lanes);
  BatchedState(int d_h, int lanes, std::vector<double> values);

  double at(int lane, int j) const { return values[static_cast<std::size_t>(lane) * d_h + j]; }
  double& at(int lane, int j) { return values[static_cast<std::size_t>(lane) * d_h + j]; }
};

struct SparseStateVector {
  int original_length = 0;  // d_h
  int lanes = 1;
  int counter_width = kDefaultCounterWidth;
  std::vector<std::uint32_t> offsets;
  std::vector<double> group_values;  // group-major: [group * lanes + b]

  std::size_t group_count() const { return offsets.size(); }
  std::uint32_t max_offset() const { return (1u << counter_width) - 1u; }
  bool is_escape(std::size_t group) const;
  /// Groups that carry at least one non-zero lane value.
  std::size_t compute_group_count() const;
  std::size_t escape_group_count() const { return group_count() - compute_group_count(); }
  /// Positions of the compute groups, in order.
  std::vector<int> active_positions() const;
};

/// mask[j] is true iff every lane is zero at position j.
std::vector<bool> skip_mask(const BatchedState& state);

/// Throws std::invalid_argument if counter_width is outside [1, 16].
SparseStateVector encode(const BatchedState& state,
                         int counter_width = kDefaultCounterWidth);

/// Throws std::invalid_argument on malformed offsets (runs past d_h, an
/// all-zero group that is not a full escape, or offsets wider than the
/// counter).
BatchedState decode(const SparseStateVector& sv);

/// 100 * (all-lanes-zero positions) / d_h; 0 for d_h == 0.
double effective_sparsity(const BatchedState& state);

}  // namespace zss
