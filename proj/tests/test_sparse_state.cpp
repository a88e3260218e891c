// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "zss/sparse_state.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace zss;

namespace {

BatchedState random_state(std::mt19937_64& rng, int d_h, int lanes, double p_zero) {
  BatchedState s(d_h, lanes);
  std::bernoulli_distribution zero(p_zero);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : s.values) v = zero(rng) ? 0.0 : u(rng);
  return s;
}

}  // namespace

TEST_CASE("skip_mask") {
  BatchedState a(3, 1, {0.0, 2.0, 0.0});
  CHECK(skip_mask(a) == std::vector<bool>{true, false, true});
  // two lanes: skippable only where both are zero
  BatchedState b(3, 2, {0.0, 1.0, 0.0, 0.0, 0.0, 3.0});
  CHECK(skip_mask(b) == std::vector<bool>{true, false, false});
  CHECK(skip_mask(BatchedState(5, 4)) == std::vector<bool>(5, true));
}

TEST_CASE("encode: hand-simulated counter") {
  const auto sv = encode(BatchedState(5, 1, {0, 0, 3, 0, 5}));
  CHECK(sv.offsets == std::vector<std::uint32_t>{2, 1});
  CHECK(sv.group_values == std::vector<double>{3, 5});

  const auto dense = encode(BatchedState(4, 1, {1, 2, 3, 4}));
  CHECK(dense.offsets == std::vector<std::uint32_t>(4, 0));

  CHECK(encode(BatchedState(7, 2)).group_count() == 0);
  CHECK_THROWS_AS(encode(BatchedState(3, 1), 0), std::invalid_argument);
  CHECK_THROWS_AS(encode(BatchedState(3, 1), 17), std::invalid_argument);
}

TEST_CASE("encode: counter overflow emits escape groups") {
  BatchedState s(40, 1);
  s.at(0, 39) = 0.5;
  const auto sv = encode(s);
  // 39 zeros: two escapes of 16 then a run of 7
  CHECK(sv.offsets == std::vector<std::uint32_t>{15, 15, 7});
  CHECK(sv.is_escape(0));
  CHECK(sv.is_escape(1));
  CHECK_FALSE(sv.is_escape(2));
  CHECK(sv.compute_group_count() == 1);
  CHECK(sv.active_positions() == std::vector<int>{39});
  CHECK(decode(sv).values == s.values);

  // a run of exactly 15 fits the counter
  BatchedState t(16, 1);
  t.at(0, 15) = 1.0;
  CHECK(encode(t).offsets == std::vector<std::uint32_t>{15});
}

TEST_CASE("decode: trivial cases and malformed input") {
  SparseStateVector empty;
  empty.original_length = 4;
  CHECK(decode(empty).values == std::vector<double>(4, 0.0));

  SparseStateVector one;
  one.original_length = 4;
  one.offsets = {0};
  one.group_values = {0.7};
  CHECK(decode(one).values == std::vector<double>{0.7, 0, 0, 0});

  SparseStateVector past = one;
  past.offsets = {4};
  CHECK_THROWS_AS(decode(past), std::invalid_argument);

  SparseStateVector fake_escape = one;
  fake_escape.group_values = {0.0};
  CHECK_THROWS_AS(decode(fake_escape), std::invalid_argument);

  SparseStateVector wide = one;
  wide.original_length = 100;
  wide.offsets = {16};
  CHECK_THROWS_AS(decode(wide), std::invalid_argument);
}

TEST_CASE("decode(encode(x)) is the identity") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> len(1, 2048);
  std::uniform_real_distribution<double> pz(0.0, 1.0);
  for (int lanes : {1, 2, 8, 16}) {
    for (int trial = 0; trial < 100; ++trial) {
      // very sparse draws exercise the escape path
      const double p = trial % 3 == 0 ? 0.995 : pz(rng);
      const auto s = random_state(rng, len(rng), lanes, p);
      const auto sv = encode(s);
      REQUIRE(decode(sv).values == s.values);
      const double expect_groups = s.d_h * (1.0 - effective_sparsity(s) / 100.0);
      REQUIRE(static_cast<double>(sv.compute_group_count()) ==
              doctest::Approx(expect_groups).epsilon(1e-12));
    }
  }
}

TEST_CASE("effective sparsity of independent lanes follows s^B") {
  std::mt19937_64 rng(32);
  const int d_h = 20000;
  const double s = 0.9;
  double previous = 101.0;
  for (int lanes : {1, 2, 4, 8, 16}) {
    const auto st = random_state(rng, d_h, lanes, s);
    const double eff = effective_sparsity(st) / 100.0;
    const double expect = std::pow(s, lanes);
    const double sigma = std::sqrt(expect * (1 - expect) / d_h);
    CHECK(std::fabs(eff - expect) <= 3 * sigma);
    CHECK(eff * 100.0 <= previous);
    previous = eff * 100.0;
  }
  CHECK(effective_sparsity(BatchedState(0, 1)) == 0.0);
}

TEST_CASE("skip_mask with one lane marks exactly the zeros") {
  std::mt19937_64 rng(33);
  const auto s = random_state(rng, 500, 1, 0.5);
  const auto mask = skip_mask(s);
  for (int j = 0; j < 500; ++j) CHECK(mask[j] == (s.at(0, j) == 0.0));
}
