#pragma once

#include <array>
#include <string>
#include <vector>

#include "parknet/trajectory.hpp"

namespace parknet {

struct MetricReport {
  double l2 = 0.0;            // meters
  double hausdorff = 0.0;     // meters
  double fourier_diff = 0.0;  // dimensionless
};

// Shared conventions (declared, applied identically to every method):
//   - l2_distance: arc-length resample both trajectories to K=64 points,
//     then mean pointwise Euclidean distance.
//   - hausdorff: max over both directed nearest-point distances on the raw
//     (unresampled) points.
//   - fourier_diff: resample to K=64, form z_t = x_t + i y_t, take the DFT,
//     keep the magnitudes of the first 16 coefficients, return the Euclidean
//     norm of the descriptor difference.
inline constexpr int kResamplePoints = 64;
inline constexpr int kFourierDescriptors = 16;

std::vector<std::array<double, 2>> resample_arc_length(const Trajectory& traj, int k);

double l2_distance(const Trajectory& pred, const Trajectory& gt);
double hausdorff(const Trajectory& a, const Trajectory& b);
double fourier_diff(const Trajectory& a, const Trajectory& b);

MetricReport compare_trajectories(const Trajectory& pred, const Trajectory& gt);

// Reads matching *.csv trajectory files from two directories and writes
// "id,l2,hausdorff,fourier_diff" rows plus a final mean row.
void batch_evaluate(const std::string& pred_dir, const std::string& gt_dir,
                    const std::string& out_csv);

}  // namespace parknet
