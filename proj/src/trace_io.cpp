// SPDX-License-Identifier: Apache-2.0
#include "zss/trace_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace zss {

namespace {

constexpr std::array<char, 8> kMagic = {'Z', 'S', 'S', 'T', 'R', 'A', 'C', 'E'};

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little,
                "trace I/O assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename T>
  T get(const char* field) {
    char buf[sizeof(T)];
    is_.read(buf, sizeof(T));
    if (is_.gcount() != static_cast<std::streamsize>(sizeof(T))) {
      throw TraceFormatError(std::string("truncated while reading ") + field,
                             pos_);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::istream& is_;
  std::size_t pos_ = 0;
};

std::int8_t to_int8(double v, double scale) {
  const double r = std::round(v / scale);
  return static_cast<std::int8_t>(std::clamp(r, -128.0, 127.0));
}

}  // namespace

TraceFormatError::TraceFormatError(const std::string& what, std::size_t offset)
    : std::runtime_error("trace: " + what + " at byte " +
                         std::to_string(offset)),
      offset_(offset) {}

void write_trace(std::ostream& os, const StateTrace& trace) {
  if (!(trace.scale > 0.0)) {
    throw std::invalid_argument("write_trace: scale must be positive");
  }
  if (trace.counter_width < 1 || trace.counter_width > 8) {
    throw std::invalid_argument(
        "write_trace: counter width must fit the u8 offset field");
  }
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kTraceVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(trace.d_h));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(trace.lanes));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(trace.counter_width));
  put<double>(os, trace.scale);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(trace.steps.size()));

  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const SparseStateVector& sv = trace.steps[s];
    if (sv.original_length != trace.d_h || sv.lanes != trace.lanes ||
        sv.counter_width != trace.counter_width) {
      throw std::invalid_argument("write_trace: step " + std::to_string(s) +
                                  " does not match the trace header");
    }
    put<std::uint32_t>(os, static_cast<std::uint32_t>(sv.group_count()));
    for (std::size_t g = 0; g < sv.group_count(); ++g) {
      put<std::uint8_t>(os, static_cast<std::uint8_t>(sv.offsets[g]));
      bool any = false;
      for (int b = 0; b < sv.lanes; ++b) {
        const std::int8_t q = to_int8(sv.group_values[g * sv.lanes + b], trace.scale);
        any = any || q != 0;
        put<std::int8_t>(os, q);
      }
      if (!any && !sv.is_escape(g)) {
        throw std::invalid_argument(
            "write_trace: step " + std::to_string(s) + " group " +
            std::to_string(g) + " quantizes to all zeros");
      }
    }
  }
  if (!os) throw std::runtime_error("write_trace: stream write failed");
}

void write_trace(const std::filesystem::path& path, const StateTrace& trace) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  write_trace(os, trace);
}

StateTrace read_trace(std::istream& is) {
  Reader r(is);
  std::array<char, 8> magic{};
  for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>("magic"));
  if (magic != kMagic) throw TraceFormatError("bad magic", 0);

  const auto version = r.get<std::uint32_t>("version");
  if (version != kTraceVersion) {
    throw TraceFormatError("unsupported version " + std::to_string(version),
                           r.pos() - 4);
  }
  StateTrace t;
  t.d_h = static_cast<int>(r.get<std::uint32_t>("d_h"));
  t.lanes = static_cast<int>(r.get<std::uint32_t>("lanes"));
  if (t.lanes < 1) throw TraceFormatError("lane count must be >= 1", r.pos() - 4);
  t.counter_width = static_cast<int>(r.get<std::uint32_t>("counter width"));
  if (t.counter_width < 1 || t.counter_width > 8) {
    throw TraceFormatError("counter width out of range", r.pos() - 4);
  }
  t.scale = r.get<double>("scale");
  if (!(t.scale > 0.0) || !std::isfinite(t.scale)) {
    throw TraceFormatError("scale must be positive", r.pos() - 8);
  }
  const auto steps = r.get<std::uint32_t>("step count");

  const std::uint32_t max_offset = (1u << t.counter_width) - 1u;
  for (std::uint32_t s = 0; s < steps; ++s) {
    SparseStateVector sv;
    sv.original_length = t.d_h;
    sv.lanes = t.lanes;
    sv.counter_width = t.counter_width;
    const auto groups = r.get<std::uint32_t>("group count");
    if (groups > static_cast<std::uint32_t>(t.d_h)) {
      throw TraceFormatError("group count exceeds d_h", r.pos() - 4);
    }
    long pos = -1;
    for (std::uint32_t g = 0; g < groups; ++g) {
      const std::size_t at = r.pos();
      const auto off = r.get<std::uint8_t>("offset");
      if (off > max_offset) {
        throw TraceFormatError("offset wider than the counter", at);
      }
      pos += off + 1;
      if (pos >= t.d_h) throw TraceFormatError("group runs past d_h", at);
      bool any = false;
      sv.offsets.push_back(off);
      for (int b = 0; b < t.lanes; ++b) {
        const auto q = r.get<std::int8_t>("lane value");
        any = any || q != 0;
        sv.group_values.push_back(static_cast<double>(q) * t.scale);
      }
      if (!any && off != max_offset) {
        throw TraceFormatError("all-zero group without saturated offset", at);
      }
    }
    t.steps.push_back(std::move(sv));
  }
  return t;
}

StateTrace read_trace(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_trace(is);
}

}  // namespace zss
