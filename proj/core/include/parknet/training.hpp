#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parknet/config.hpp"
#include "parknet/dataset.hpp"
#include "parknet/metrics.hpp"
#include "parknet/model.hpp"
#include "parknet/nn.hpp"

namespace parknet {

// One training item: the sensor view at trajectory step j plus the next
// horizon points (and their token/supervision forms), everything expressed
// in the ego frame at step j. Windows clamp at the trajectory end, so the
// final point repeats and every sample has exactly `horizon` future points.
struct Sample {
  const DatasetTrajectory* traj = nullptr;
  int64_t step = 0;
  double slot_x = 0.0, slot_y = 0.0;
  std::vector<double> future_x, future_y;  // horizon points
  std::vector<int64_t> x_in, y_in;    // decoder inputs [BOS, s1..sQ]
  std::vector<int64_t> x_tgt, y_tgt;  // targets [s1..sQ, EOS]

  SampleInput input() const;
  // Supervision maps on the refinement grid, one normalized Gaussian per
  // future point (computed on demand; a pure function of the stored window).
  std::vector<WeightMap> maps(const ModelConfig& cfg) const;
};

Sample make_sample(const DatasetTrajectory& traj, int64_t step, const ModelConfig& cfg);

// One Sample per (trajectory, step), trajectory-major then step-major.
// Throws a data error naming the record when a trajectory is missing sensor
// data for some step.
std::vector<Sample> reorganize(const Dataset& data, const ModelConfig& cfg);

struct LossBreakdown {
  double loss_x = 0.0;
  double loss_y = 0.0;
  double loss_map = 0.0;
  double total = 0.0;
};

struct LossGraph {
  Tensor total;  // scalar, connected to the parameters
  LossBreakdown values;
};

// L_x, L_y: token cross-entropies (PAD ignored). L_m: mean per-step KL
// divergence from the ground-truth map to the predicted map. total =
// L_x + L_y + lambda_map * L_m.
LossGraph compute_loss(const ModelConfig& cfg, const DecoderOutput& out, const Sample& sample,
                       double lambda_map);

struct TrainLogRow {
  int64_t step = 0;
  LossBreakdown loss;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  LossBreakdown final_loss;
  double best_total = 0.0;
};

// Seed-deterministic optimization loop; logs per-step losses, writes the
// best-seen checkpoint to checkpoint_path and the loss log to metrics_csv
// (either may be empty to skip). Aborts with a diagnostic on divergence.
TrainResult train_model(ParkingModel& model, const std::vector<Sample>& samples,
                        const TrainConfig& cfg, const std::string& checkpoint_path = "",
                        const std::string& metrics_csv = "", Adam* optimizer = nullptr);

// Deterministic 90/10-style split by whole trajectory.
std::pair<std::vector<size_t>, std::vector<size_t>> split_by_trajectory(size_t count,
                                                                        double val_fraction,
                                                                        uint64_t seed);

struct MetricSummary {
  double hausdorff = 0.0;
  double l2 = 0.0;
  double fourier = 0.0;
  int64_t count = 0;
};

// Ground-truth window at a step, as a metric trajectory in that step's frame.
Trajectory ground_truth_window(const DatasetTrajectory& traj, int64_t step, int64_t horizon);

// Greedy-decode each held-out trajectory from its initial moment and compare
// with the ground-truth window. An empty prediction falls back to a single
// origin point so every variant is scored on the same footing.
MetricSummary evaluate_model(const ParkingModel& model, const Dataset& held_out,
                             const std::vector<size_t>& indices);

struct AblationRow {
  std::string variant;
  MetricSummary metrics;
};

// Table 3-style matrix plus the interleaved single-decoder baseline. Every
// variant shares the seed, split and schedule of `base`. Writes one
// checkpoint and loss log per variant under out_dir when non-empty.
std::vector<AblationRow> run_ablation_matrix(const Dataset& data, const ExperimentConfig& base,
                                             const std::string& out_dir = "");

// CSV columns exactly: variant,hausdorff_m,l2_m,fourier_diff.
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace parknet
