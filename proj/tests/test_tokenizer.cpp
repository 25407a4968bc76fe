#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "parknet/rng.hpp"
#include "parknet/tokenizer.hpp"

using namespace parknet;

namespace {
const TokenizerConfig kPaperCfg{10.0, 10.0, 1200, 30};
}

TEST_CASE("serialize: bounds and center at paper settings") {
  CHECK(serialize_coord(-10.0, 10.0, 1200) == 0);
  CHECK(serialize_coord(0.0, 10.0, 1200) == 600);
  CHECK(serialize_coord(10.0, 10.0, 1200) == 1199);  // +R floors to N_t, clamps back
}

TEST_CASE("serialize: out-of-range clamps, non-finite rejects") {
  CHECK(serialize_coord(-1e9, 10.0, 1200) == 0);
  CHECK(serialize_coord(1e9, 10.0, 1200) == 1199);
  CHECK_THROWS_AS(serialize_coord(std::numeric_limits<double>::quiet_NaN(), 10.0, 1200),
                  std::invalid_argument);
  CHECK_THROWS_AS(serialize_coord(std::numeric_limits<double>::infinity(), 10.0, 1200),
                  std::invalid_argument);
}

TEST_CASE("serialize never emits control tokens") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.uniform(-30.0, 30.0);
    const int64_t t = serialize_coord(p, 10.0, 1200);
    CHECK(t >= 0);
    CHECK(t <= 1199);
  }
}

TEST_CASE("deserialize: bin centers and contract errors") {
  CHECK(deserialize_token(0, 10.0, 1200) ==
        doctest::Approx(-10.0 + 0.5 * 20.0 / 1200.0).epsilon(1e-12));
  // BOS/EOS/PAD are not coordinates
  CHECK_THROWS_AS(deserialize_token(1200, 10.0, 1200), std::logic_error);
  CHECK_THROWS_AS(deserialize_token(1201, 10.0, 1200), std::logic_error);
  CHECK_THROWS_AS(deserialize_token(-1, 10.0, 1200), std::logic_error);
}

TEST_CASE("tokens 599 and 600 straddle zero symmetrically") {
  const double lo = deserialize_token(599, 10.0, 1200);
  const double hi = deserialize_token(600, 10.0, 1200);
  CHECK(lo == doctest::Approx(-hi).epsilon(1e-12));
  CHECK(hi > 0.0);
}

TEST_CASE("round trip is bounded by one bin width over 10^4 random coordinates") {
  Rng rng(7);
  const double bin = 2.0 * 10.0 / 1200.0;
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.uniform(-10.0, 10.0);
    const double back = deserialize_token(serialize_coord(p, 10.0, 1200), 10.0, 1200);
    CHECK(std::abs(back - p) <= bin);
  }
}

TEST_CASE("monotonicity over ordered random pairs") {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    double p1 = rng.uniform(-12.0, 12.0);
    double p2 = rng.uniform(-12.0, 12.0);
    if (p1 > p2) std::swap(p1, p2);
    CHECK(serialize_coord(p1, 10.0, 1200) <= serialize_coord(p2, 10.0, 1200));
  }
}

TEST_CASE("build_sequences: single origin point") {
  auto [sx, sy] = build_sequences({0.0}, {0.0}, kPaperCfg);
  CHECK(sx.tokens == std::vector<int64_t>{kPaperCfg.bos(), 600, kPaperCfg.eos()});
  CHECK(sy.tokens == std::vector<int64_t>{kPaperCfg.bos(), 600, kPaperCfg.eos()});
}

TEST_CASE("build_sequences: lengths always match and include the markers") {
  Rng rng(13);
  std::vector<double> xs, ys;
  for (int i = 0; i < 30; ++i) {
    xs.push_back(rng.uniform(-10, 10));
    ys.push_back(rng.uniform(-10, 10));
  }
  auto [sx, sy] = build_sequences(xs, ys, kPaperCfg);
  CHECK(sx.tokens.size() == 32);
  CHECK(sy.tokens.size() == 32);
  CHECK(sx.tokens.front() == kPaperCfg.bos());
  CHECK(sx.tokens.back() == kPaperCfg.eos());
}

TEST_CASE("build_sequences: errors") {
  CHECK_THROWS_AS(build_sequences({}, {}, kPaperCfg), std::invalid_argument);
  CHECK_THROWS_AS(build_sequences({1.0, 2.0}, {1.0}, kPaperCfg), std::invalid_argument);
}

TEST_CASE("vocabulary layout leaves control tokens above the coordinate bins") {
  CHECK(kPaperCfg.bos() == 1200);
  CHECK(kPaperCfg.eos() == 1201);
  CHECK(kPaperCfg.pad() == 1202);
  CHECK(kPaperCfg.vocab_size() == 1203);
}
