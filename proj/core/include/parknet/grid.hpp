#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace parknet {

// Metric <-> pixel convention, used everywhere in this project:
//   pixel (i, j) = (row, column), cell centers;
//   row i runs from +y downward, column j runs from -x rightward:
//     x = (j + 0.5) * resolution - range_x
//     y = range_y - (i + 0.5) * resolution
// Fractional pixel coordinates are the inverse mapping.
struct GridSpec {
  int64_t height = 100;
  int64_t width = 100;
  double range_x = 10.0;  // meters, half-range
  double range_y = 10.0;
  double resolution = 0.2;  // meters per cell

  void validate() const;
  int64_t cells() const { return height * width; }

  // Fractional (row, col) of a metric point.
  std::pair<double, double> metric_to_pixel(double x, double y) const;
  // Metric center of a (possibly fractional) pixel.
  std::pair<double, double> pixel_to_metric(double row, double col) const;
  bool pixel_on_grid(double row, double col) const;

  bool operator==(const GridSpec& o) const;
};

// Nonnegative scalar field over a grid. `normalized` marks maps that sum to 1.
struct WeightMap {
  GridSpec grid;
  std::vector<double> values;  // height * width, row-major
  bool normalized = false;

  double at(int64_t row, int64_t col) const { return values[row * grid.width + col]; }
  double sum() const;
  std::pair<int64_t, int64_t> argmax_cell() const;
};

// Unnormalized Gaussian kernel map: exp(-((i-cr)^2 + (j-cc)^2) / (2 sigma^2)).
// Peak value is exactly 1 at the center cell when the center is an on-grid
// integer pixel. center = (row, col), fractional and off-grid allowed.
WeightMap gaussian_query(double center_row, double center_col, double sigma,
                         const GridSpec& grid);

// Same kernel divided by its grid-wide sum; always sums to 1.
WeightMap gaussian_normalized(double center_row, double center_col, double sigma,
                              const GridSpec& grid);

// Axis-aligned square window of ones: |i - cr| <= half_extent and
// |j - cc| <= half_extent; zero elsewhere. The ablation baseline query.
WeightMap binary_query(double center_row, double center_col, double half_extent,
                       const GridSpec& grid);

// Supervision maps for a prediction window: map b (b = 1..horizon) is the
// normalized Gaussian at future point min(b, N) of the given remaining
// trajectory, projected to the grid (off-grid points clamp to the border
// cell). Always returns exactly `horizon` maps.
std::vector<WeightMap> ground_truth_maps(const std::vector<double>& traj_x,
                                         const std::vector<double>& traj_y,
                                         int64_t horizon, double sigma,
                                         const GridSpec& grid);

// 8-bit binary PGM (P5), scaled so the map maximum renders as 255.
void write_pgm(const WeightMap& map, const std::string& path);

}  // namespace parknet
