#include "parknet/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace parknet {

void GridSpec::validate() const {
  if (height < 1 || width < 1) throw std::invalid_argument("grid: extents must be positive");
  if (!(resolution > 0.0)) throw std::invalid_argument("grid: resolution must be positive");
  const double cell = resolution;
  if (std::abs(static_cast<double>(height) * resolution - 2.0 * range_y) > cell ||
      std::abs(static_cast<double>(width) * resolution - 2.0 * range_x) > cell) {
    throw std::invalid_argument("grid: extents, ranges and resolution are inconsistent");
  }
}

std::pair<double, double> GridSpec::metric_to_pixel(double x, double y) const {
  const double col = (x + range_x) / resolution - 0.5;
  const double row = (range_y - y) / resolution - 0.5;
  return {row, col};
}

std::pair<double, double> GridSpec::pixel_to_metric(double row, double col) const {
  const double x = (col + 0.5) * resolution - range_x;
  const double y = range_y - (row + 0.5) * resolution;
  return {x, y};
}

bool GridSpec::pixel_on_grid(double row, double col) const {
  return row >= 0.0 && row <= static_cast<double>(height - 1) && col >= 0.0 &&
         col <= static_cast<double>(width - 1);
}

bool GridSpec::operator==(const GridSpec& o) const {
  return height == o.height && width == o.width && range_x == o.range_x &&
         range_y == o.range_y && resolution == o.resolution;
}

double WeightMap::sum() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

std::pair<int64_t, int64_t> WeightMap::argmax_cell() const {
  int64_t best = 0;
  for (int64_t i = 1; i < static_cast<int64_t>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return {best / grid.width, best % grid.width};
}

WeightMap gaussian_query(double center_row, double center_col, double sigma,
                         const GridSpec& grid) {
  grid.validate();
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_query: sigma must be positive");
  WeightMap map;
  map.grid = grid;
  map.normalized = false;
  map.values.resize(static_cast<size_t>(grid.cells()));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int64_t i = 0; i < grid.height; ++i) {
    const double di = static_cast<double>(i) - center_row;
    for (int64_t j = 0; j < grid.width; ++j) {
      const double dj = static_cast<double>(j) - center_col;
      map.values[static_cast<size_t>(i * grid.width + j)] =
          std::exp(-(di * di + dj * dj) * inv2s2);
    }
  }
  return map;
}

WeightMap gaussian_normalized(double center_row, double center_col, double sigma,
                              const GridSpec& grid) {
  grid.validate();
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gaussian_normalized: sigma must be positive");
  }
  WeightMap map;
  map.grid = grid;
  map.normalized = true;
  map.values.resize(static_cast<size_t>(grid.cells()));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  // shift by the max exponent before exponentiating so the normalization
  // stays exact for centers far off-grid
  double emax = -std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < grid.height; ++i) {
    const double di = static_cast<double>(i) - center_row;
    for (int64_t j = 0; j < grid.width; ++j) {
      const double dj = static_cast<double>(j) - center_col;
      const double e = -(di * di + dj * dj) * inv2s2;
      map.values[static_cast<size_t>(i * grid.width + j)] = e;
      emax = std::max(emax, e);
    }
  }
  double z = 0.0;
  for (auto& v : map.values) {
    v = std::exp(v - emax);
    z += v;
  }
  const double inv = 1.0 / z;
  for (auto& v : map.values) v *= inv;
  return map;
}

WeightMap binary_query(double center_row, double center_col, double half_extent,
                       const GridSpec& grid) {
  grid.validate();
  if (half_extent < 0.0) {
    throw std::invalid_argument("binary_query: half_extent must be >= 0");
  }
  WeightMap map;
  map.grid = grid;
  map.normalized = false;
  map.values.assign(static_cast<size_t>(grid.cells()), 0.0);
  const int64_t i0 = static_cast<int64_t>(std::ceil(center_row - half_extent));
  const int64_t i1 = static_cast<int64_t>(std::floor(center_row + half_extent));
  const int64_t j0 = static_cast<int64_t>(std::ceil(center_col - half_extent));
  const int64_t j1 = static_cast<int64_t>(std::floor(center_col + half_extent));
  for (int64_t i = std::max<int64_t>(i0, 0); i <= std::min(i1, grid.height - 1); ++i) {
    for (int64_t j = std::max<int64_t>(j0, 0); j <= std::min(j1, grid.width - 1); ++j) {
      map.values[static_cast<size_t>(i * grid.width + j)] = 1.0;
    }
  }
  return map;
}

std::vector<WeightMap> ground_truth_maps(const std::vector<double>& traj_x,
                                         const std::vector<double>& traj_y,
                                         int64_t horizon, double sigma,
                                         const GridSpec& grid) {
  grid.validate();
  if (traj_x.empty() || traj_x.size() != traj_y.size()) {
    throw std::invalid_argument("ground_truth_maps: trajectory must be non-empty with "
                                "matching axis lengths");
  }
  if (horizon < 1) throw std::invalid_argument("ground_truth_maps: horizon must be >= 1");
  const int64_t n = static_cast<int64_t>(traj_x.size());
  std::vector<WeightMap> maps;
  maps.reserve(static_cast<size_t>(horizon));
  for (int64_t b = 1; b <= horizon; ++b) {
    const int64_t idx = std::min(b, n) - 1;
    auto [row, col] = grid.metric_to_pixel(traj_x[static_cast<size_t>(idx)],
                                           traj_y[static_cast<size_t>(idx)]);
    row = std::clamp(row, 0.0, static_cast<double>(grid.height - 1));
    col = std::clamp(col, 0.0, static_cast<double>(grid.width - 1));
    maps.push_back(gaussian_normalized(row, col, sigma, grid));
  }
  return maps;
}

void write_pgm(const WeightMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
  double mx = 0.0;
  for (double v : map.values) mx = std::max(mx, v);
  const double scale = mx > 0.0 ? 255.0 / mx : 0.0;
  os << "P5\n" << map.grid.width << " " << map.grid.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(map.grid.width));
  for (int64_t i = 0; i < map.grid.height; ++i) {
    for (int64_t j = 0; j < map.grid.width; ++j) {
      const double v = map.at(i, j) * scale;
      row[static_cast<size_t>(j)] =
          static_cast<unsigned char>(std::clamp(v, 0.0, 255.0) + 0.5);
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("write_pgm: write failed: " + path);
}

}  // namespace parknet
