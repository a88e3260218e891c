// SPDX-License-Identifier: Apache-2.0
#include "zss/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace zss {

namespace {

std::string shape_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace

std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

RealTensor::RealTensor(std::vector<double> values,
                       std::vector<std::size_t> dims)
    : data(std::move(values)), shape(std::move(dims)) {
  if (shape_product(shape) != data.size()) {
    throw std::invalid_argument("RealTensor: shape " + shape_string(shape) +
                                " does not match " +
                                std::to_string(data.size()) + " elements");
  }
}

RealTensor RealTensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return RealTensor(std::move(values), {n});
}

QuantizedTensor quantize(const RealTensor& x, int bits, ScalePolicy policy,
                         double fixed_scale) {
  if (bits < 2 || bits > 8) {
    throw std::invalid_argument("quantize: bits must lie in [2, 8], got " +
                                std::to_string(bits));
  }
  const double qmax = static_cast<double>((1 << (bits - 1)) - 1);
  const double qmin = -qmax - 1.0;

  double max_abs = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double v = x.data[i];
    if (!std::isfinite(v)) {
      throw std::invalid_argument("quantize: non-finite value at index " +
                                  std::to_string(i));
    }
    max_abs = std::max(max_abs, std::abs(v));
  }

  double scale = 1.0;
  if (policy == ScalePolicy::kFixed) {
    if (!(fixed_scale > 0.0) || !std::isfinite(fixed_scale)) {
      throw std::invalid_argument("quantize: fixed scale must be positive");
    }
    scale = fixed_scale;
  } else if (max_abs > 0.0) {
    scale = max_abs / qmax;
  }

  QuantizedTensor q;
  q.scale = scale;
  q.shape = x.shape;
  q.data.resize(x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double r = std::round(x.data[i] / scale);
    q.data[i] = static_cast<std::int8_t>(std::clamp(r, qmin, qmax));
  }
  return q;
}

RealTensor dequantize(const QuantizedTensor& q) {
  std::vector<double> out(q.data.size());
  for (std::size_t i = 0; i < q.data.size(); ++i) {
    out[i] = static_cast<double>(q.data[i]) * q.scale;
  }
  return RealTensor(std::move(out), q.shape);
}

std::vector<std::int64_t> matvec_accumulate(const QuantizedTensor& w,
                                            const QuantizedTensor& v) {
  if (w.shape.size() != 2 || v.shape.size() != 1 || w.shape[1] != v.shape[0]) {
    throw std::invalid_argument("matvec: cannot multiply " +
                                shape_string(w.shape) + " by " +
                                shape_string(v.shape));
  }
  const std::size_t rows = w.shape[0];
  const std::size_t cols = w.shape[1];
  std::vector<std::int64_t> acc(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::int8_t* row = w.data.data() + r * cols;
    std::int64_t sum = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      sum += static_cast<std::int64_t>(row[c]) * v.data[c];
    }
    acc[r] = sum;
  }
  return acc;
}

RealTensor matvec(const QuantizedTensor& w, const QuantizedTensor& v) {
  const auto acc = matvec_accumulate(w, v);
  const double scale = w.scale * v.scale;
  std::vector<double> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    out[i] = static_cast<double>(acc[i]) * scale;
  }
  return RealTensor::vector(std::move(out));
}

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double tanh(double x) { return std::tanh(x); }

}  // namespace zss
