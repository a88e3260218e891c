// SPDX-License-Identifier: Apache-2.0
/**
 * @file   numerics.hpp
 * @brief  Fixed-point tensors and the dense primitives the rest of the
 *         library builds on.
 *
 * Quantization is symmetric and signed with one real scale per tensor:
 * value = integer * scale. Integer products accumulate in 64-bit so the
 * accumulator semantics are exact regardless of the reduction length.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace zss {

struct RealTensor {
  std::vector<double> data;
  std::vector<std::size_t> shape;

  RealTensor() = default;
  RealTensor(std::vector<double> values, std::vector<std::size_t> dims);
  /// 1-D tensor over @p values.
  static RealTensor vector(std::vector<double> values);

  std::size_t size() const { return data.size(); }
};

struct QuantizedTensor {
  std::vector<std::int8_t> data;
  double scale = 1.0;
  std::vector<std::size_t> shape;

  std::size_t size() const { return data.size(); }
};

enum class ScalePolicy {
  kPerTensorMax,  ///< scale = max|x| / qmax
  kFixed,         ///< caller-supplied scale, saturating
};

/// Number of elements described by @p shape (1 for a scalar shape).
std::size_t shape_product(std::span<const std::size_t> shape);

/// Rounds half away from zero and saturates to [-(qmax+1), qmax].
/// Throws std::invalid_argument on non-finite input or bits outside [2, 8].
QuantizedTensor quantize(const RealTensor& x, int bits = 8,
                         ScalePolicy policy = ScalePolicy::kPerTensorMax,
                         double fixed_scale = 0.0);

RealTensor dequantize(const QuantizedTensor& q);

/// Exact integer accumulators of W[m x n] * v[n].
std::vector<std::int64_t> matvec_accumulate(const QuantizedTensor& w,
                                            const QuantizedTensor& v);

/// matvec_accumulate scaled by w.scale * v.scale.
RealTensor matvec(const QuantizedTensor& w, const QuantizedTensor& v);

double sigmoid(double x);
double tanh(double x);

}  // namespace zss
