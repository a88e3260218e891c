// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used only by the tests. None of
// these call into the library code they are checked against.
#pragma once

#include "zss/accel_sim.hpp"
#include "zss/lstm.hpp"
#include "zss/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

// y[r] = sum_c W[r][c] * v[c], plain loops over the raw integers.
inline std::vector<std::int64_t> triple_loop(const std::vector<std::int8_t>& w,
                                             std::size_t rows, std::size_t cols,
                                             const std::vector<std::int8_t>& v) {
  std::vector<std::int64_t> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r] += static_cast<std::int64_t>(w[r * cols + c]) * v[c];
    }
  }
  return out;
}

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ScalarStep {
  std::vector<double> f, i, o, g, c, h;
};

// One LSTM step written element by element from the gate equations.
// @p h_used is the state multiplied by W_h (pruned or not).
inline ScalarStep scalar_step(const zss::LstmParams& p,
                              const std::vector<double>& x,
                              const std::vector<double>& h_used,
                              const std::vector<double>& c_prev) {
  const int n = p.d_h;
  ScalarStep s;
  s.f.resize(n);
  s.i.resize(n);
  s.o.resize(n);
  s.g.resize(n);
  s.c.resize(n);
  s.h.resize(n);
  for (int r = 0; r < n; ++r) {
    double z[4];
    for (int k = 0; k < 4; ++k) {
      const int row = k * n + r;
      double acc = p.b(row);
      for (int j = 0; j < n; ++j) acc += p.w_h(row, j) * h_used[j];
      for (int j = 0; j < p.d_x; ++j) acc += p.w_x(row, j) * x[j];
      z[k] = acc;
    }
    s.f[r] = sig(z[0]);
    s.i[r] = sig(z[1]);
    s.o[r] = sig(z[2]);
    s.g[r] = std::tanh(z[3]);
    s.c[r] = s.f[r] * c_prev[r] + s.i[r] * s.g[r];
    s.h[r] = s.o[r] * std::tanh(s.c[r]);
  }
  return s;
}

inline std::vector<double> scalar_prune(const std::vector<double>& h, double t) {
  std::vector<double> out(h);
  for (double& v : out) {
    if (std::fabs(v) < t) v = 0.0;
  }
  return out;
}

enum class Loss { kSquared, kXent };

inline double scalar_loss_term(const std::vector<double>& h,
                               const std::vector<double>& y, Loss kind) {
  double total = 0.0;
  if (kind == Loss::kSquared) {
    for (std::size_t k = 0; k < h.size(); ++k) total += 0.5 * (h[k] - y[k]) * (h[k] - y[k]);
    return total;
  }
  double z = 0.0;
  for (double v : h) z += std::exp(v);
  for (std::size_t k = 0; k < h.size(); ++k) total -= y[k] * (h[k] - std::log(z));
  return total;
}

struct SeqRun {
  double loss = 0.0;
  // prune masks (true = zeroed) of the consumed state at every step
  std::vector<std::vector<bool>> masks;
};

// Sequence loss with the consumed state at step t equal to
// prune(h_{t-1}, T) or, when @p residuals is given, h_{t-1} + residuals[t]
// (a frozen correction that makes the consumed state smooth in h).
inline SeqRun scalar_sequence(const zss::LstmParams& p,
                              const std::vector<std::vector<double>>& xs,
                              std::vector<double> h, std::vector<double> c,
                              const std::vector<std::vector<double>>& ys,
                              double threshold, Loss kind,
                              const std::vector<std::vector<double>>* residuals = nullptr) {
  SeqRun run;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    std::vector<double> used;
    if (residuals) {
      used = h;
      for (std::size_t j = 0; j < used.size(); ++j) used[j] += (*residuals)[t][j];
    } else {
      used = scalar_prune(h, threshold);
    }
    std::vector<bool> mask(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) mask[j] = std::fabs(h[j]) < threshold;
    run.masks.push_back(mask);
    const ScalarStep s = scalar_step(p, xs[t], used, c);
    h = s.h;
    c = s.c;
    run.loss += scalar_loss_term(h, ys[t], kind);
  }
  return run;
}

// Cycle-stepped event-list model of one recurrent product. Every cycle the
// fetch unit either issues the next (position, block) item or stalls; an
// issued item books its group for B cycles and records one MAC event per
// lane. Returns the cycle after the last MAC event. Throws if any group or
// lane input is double-booked, which would indicate an invalid schedule.
struct EventListResult {
  std::int64_t cycles = 0;
  std::int64_t mac_events = 0;
};

inline EventListResult event_list_cycles(const zss::AcceleratorConfig& cfg,
                                         int rows, int positions, int lanes) {
  EventListResult res;
  if (rows <= 0 || positions <= 0) return res;
  const int groups = cfg.tiles * cfg.pes_per_tile / cfg.weights_per_cycle;
  const int blocks = (rows + cfg.weights_per_cycle - 1) / cfg.weights_per_cycle;

  // Arrival cycle of lane input (position i, lane b): element n = i*B + b of
  // the stream arrives in cycle floor(n / inputs_per_cycle).
  auto arrival = [&](int i, int b) {
    std::int64_t n = static_cast<std::int64_t>(i) * lanes + b;
    std::int64_t cycle = 0;
    std::int64_t delivered = 0;
    while (delivered + cfg.inputs_per_cycle <= n) {
      delivered += cfg.inputs_per_cycle;
      ++cycle;
    }
    return cycle;
  };

  std::vector<std::int64_t> group_free(groups, 0);
  std::map<std::pair<int, std::int64_t>, int> booked;  // (group, cycle) -> uses
  std::int64_t last_event = -1;
  int item = 0;
  const int items = positions * blocks;
  for (std::int64_t cycle = 0; item < items; ++cycle) {
    const int pos = item / blocks;
    const int g = item % groups;
    if (cycle < group_free[g]) continue;
    bool inputs_ready = true;
    for (int b = 0; b < lanes; ++b) {
      if (arrival(pos, b) > cycle + b) inputs_ready = false;
    }
    if (!inputs_ready) continue;
    for (int b = 0; b < lanes; ++b) {
      const std::int64_t at = cycle + b;
      if (++booked[{g, at}] > 1) throw std::logic_error("group double-booked");
      last_event = std::max(last_event, at);
      ++res.mac_events;
    }
    group_free[g] = cycle + lanes;
    ++item;
  }
  res.cycles = last_event + 1;
  return res;
}

}  // namespace oracle
