#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "parknet/grid.hpp"
#include "parknet/rng.hpp"

using namespace parknet;

namespace {
GridSpec small_grid() { return GridSpec{64, 64, 6.4, 6.4, 0.2}; }
GridSpec paper_grid() { return GridSpec{200, 200, 10.0, 10.0, 0.1}; }
}  // namespace

TEST_CASE("grid spec validates the extent/range/resolution relation") {
  CHECK_NOTHROW(paper_grid().validate());
  GridSpec bad{200, 200, 10.0, 5.0, 0.1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("metric/pixel mapping round-trips and follows the documented axes") {
  const GridSpec g = paper_grid();
  // +y is up, so it maps to row 0; -x maps to column 0
  auto [r_top, c_left] = g.metric_to_pixel(-10.0 + 0.05, 10.0 - 0.05);
  CHECK(r_top == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(c_left == doctest::Approx(0.0).epsilon(1e-9));
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-10, 10), y = rng.uniform(-10, 10);
    auto [row, col] = g.metric_to_pixel(x, y);
    auto [xx, yy] = g.pixel_to_metric(row, col);
    CHECK(xx == doctest::Approx(x).epsilon(1e-12));
    CHECK(yy == doctest::Approx(y).epsilon(1e-12));
  }
}

TEST_CASE("gaussian_query: peak exactly 1 on-grid, exp(-1/2) at one sigma") {
  const GridSpec g = small_grid();
  WeightMap m = gaussian_query(20.0, 30.0, 5.0, g);
  CHECK(m.at(20, 30) == 1.0);
  CHECK(m.at(25, 30) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(m.at(20, 35) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_query(5, 5, 0.0, g), std::invalid_argument);
}

TEST_CASE("gaussian_query: off-grid center keeps peak below 1") {
  const GridSpec g = small_grid();
  WeightMap m = gaussian_query(-4.0, 10.0, 5.0, g);
  double mx = 0.0;
  for (double v : m.values) mx = std::max(mx, v);
  CHECK(mx < 1.0);
  CHECK(mx > 0.0);
}

TEST_CASE("gaussian_query: 200x200 sum matches a scalar double-loop oracle to 1e-9") {
  const GridSpec g = paper_grid();
  const double cr = 100.0, cc = 100.0, sigma = 5.0;
  WeightMap m = gaussian_query(cr, cc, sigma, g);
  long double ref = 0.0L;
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      const long double di = i - cr, dj = j - cc;
      ref += expl(-(di * di + dj * dj) / (2.0L * sigma * sigma));
    }
  }
  CHECK(std::abs(m.sum() - static_cast<double>(ref)) <= 1e-9);
}

TEST_CASE("gaussian_query: integer translation covariance is exact") {
  const GridSpec g = small_grid();
  WeightMap a = gaussian_query(20.0, 20.0, 4.0, g);
  WeightMap b = gaussian_query(23.0, 25.0, 4.0, g);
  for (int64_t i = 0; i < g.height - 3; ++i) {
    for (int64_t j = 0; j < g.width - 5; ++j) {
      CHECK(a.at(i, j) == b.at(i + 3, j + 5));
    }
  }
}

TEST_CASE("monotone decay with distance along rays, both gaussian forms") {
  const GridSpec g = small_grid();
  WeightMap q = gaussian_query(32.0, 32.0, 3.0, g);
  WeightMap n = gaussian_normalized(32.0, 32.0, 3.0, g);
  for (int64_t step = 1; step < 30; ++step) {
    CHECK(q.at(32, 32 + step) < q.at(32, 32 + step - 1));
    CHECK(n.at(32 + step, 32) < n.at(32 + step - 1, 32));
    CHECK(q.at(32 + step, 32 + step) < q.at(32 + step - 1, 32 + step - 1));
  }
}

TEST_CASE("gaussian_normalized sums to 1 for any center, including far off-grid") {
  const GridSpec g = small_grid();
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double cr = rng.uniform(-100.0, 160.0);
    const double cc = rng.uniform(-100.0, 160.0);
    const double sigma = rng.uniform(0.5, 10.0);
    WeightMap m = gaussian_normalized(cr, cc, sigma, g);
    CHECK(std::abs(m.sum() - 1.0) <= 1e-6);
  }
}

TEST_CASE("gaussian_normalized: symmetric cells about an on-grid center are equal") {
  const GridSpec g = small_grid();
  WeightMap m = gaussian_normalized(30.0, 40.0, 2.5, g);
  CHECK(m.at(30, 42) == doctest::Approx(m.at(30, 38)).epsilon(1e-14));
  CHECK(m.at(27, 40) == doctest::Approx(m.at(33, 40)).epsilon(1e-14));
}

TEST_CASE("gaussian_normalized: argmax equals the nearest cell for 100 random centers") {
  const GridSpec g = small_grid();
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const double cr = rng.uniform(0.0, 63.0);
    const double cc = rng.uniform(0.0, 63.0);
    WeightMap m = gaussian_normalized(cr, cc, 2.0, g);
    // brute-force nearest-cell search
    int64_t best_i = 0, best_j = 0;
    double best = 1e300;
    for (int64_t r = 0; r < g.height; ++r) {
      for (int64_t c = 0; c < g.width; ++c) {
        const double d = (r - cr) * (r - cr) + (c - cc) * (c - cc);
        if (d < best) {
          best = d;
          best_i = r;
          best_j = c;
        }
      }
    }
    auto [ai, aj] = m.argmax_cell();
    CHECK(ai == best_i);
    CHECK(aj == best_j);
  }
}

TEST_CASE("binary_query: single cell, clipped area count, off-grid, idempotence") {
  const GridSpec g = small_grid();
  WeightMap one = binary_query(10.0, 12.0, 0.0, g);
  CHECK(one.sum() == 1.0);
  CHECK(one.at(10, 12) == 1.0);

  // window pokes over the top-left corner: rows -2..4, cols -1..5 clip to 5x6
  WeightMap clipped = binary_query(1.0, 2.0, 3.0, g);
  CHECK(clipped.sum() == doctest::Approx(5.0 * 6.0));

  WeightMap off = binary_query(-50.0, -50.0, 3.0, g);
  CHECK(off.sum() == 0.0);

  // thresholding at 0.5 changes nothing
  for (double v : clipped.values) CHECK((v >= 0.5 ? 1.0 : 0.0) == v);
  CHECK_THROWS_AS(binary_query(5, 5, -1.0, g), std::invalid_argument);
}

TEST_CASE("ground_truth_maps: index clamping repeats the final point") {
  const GridSpec g = small_grid();
  auto maps = ground_truth_maps({1.0}, {2.0}, 3, 2.0, g);
  REQUIRE(maps.size() == 3);
  CHECK(maps[0].values == maps[1].values);
  CHECK(maps[1].values == maps[2].values);
  for (const auto& m : maps) CHECK(std::abs(m.sum() - 1.0) <= 1e-9);
}

TEST_CASE("ground_truth_maps: argmax is the projected ground-truth point") {
  const GridSpec g = small_grid();
  Rng rng(17);
  std::vector<double> xs, ys;
  for (int i = 0; i < 5; ++i) {
    xs.push_back(rng.uniform(-6.0, 6.0));
    ys.push_back(rng.uniform(-6.0, 6.0));
  }
  auto maps = ground_truth_maps(xs, ys, 5, 2.0, g);
  for (int b = 0; b < 5; ++b) {
    auto [row, col] = g.metric_to_pixel(xs[b], ys[b]);
    auto [ai, aj] = maps[b].argmax_cell();
    CHECK(ai == std::llround(row));
    CHECK(aj == std::llround(col));
  }
}

TEST_CASE("ground_truth_maps: off-grid points clamp to the border cell") {
  const GridSpec g = small_grid();
  auto maps = ground_truth_maps({100.0}, {100.0}, 1, 2.0, g);
  auto [ai, aj] = maps[0].argmax_cell();
  CHECK(ai == 0);                 // +y clamps to the top row
  CHECK(aj == g.width - 1);       // +x clamps to the right column
  CHECK(std::abs(maps[0].sum() - 1.0) <= 1e-9);
  CHECK_THROWS_AS(ground_truth_maps({}, {}, 3, 2.0, g), std::invalid_argument);
}

TEST_CASE("write_pgm emits a parseable P5 with the right dimensions") {
  const GridSpec g{8, 10, 1.0, 0.8, 0.2};
  WeightMap m = gaussian_query(4.0, 5.0, 2.0, g);
  const std::string path = "/tmp/parknet_test_map.pgm";
  write_pgm(m, path);
  std::ifstream is(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  CHECK(magic == "P5");
  CHECK(w == 10);
  CHECK(h == 8);
  CHECK(maxval == 255);
  is.get();
  std::vector<unsigned char> pixels(80);
  is.read(reinterpret_cast<char*>(pixels.data()), 80);
  CHECK(is.gcount() == 80);
  CHECK(pixels[4 * 10 + 5] == 255);  // peak renders white
  std::remove(path.c_str());
}
