#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parknet/camera.hpp"
#include "parknet/config.hpp"
#include "parknet/scenario.hpp"
#include "parknet/tensor.hpp"

namespace parknet {

// Per-step sensor data, stored compactly (f32) and expanded on demand.
struct SensorBlob {
  std::vector<int64_t> shape;
  std::vector<float> data;

  Tensor to_tensor() const;
  static SensorBlob from_tensor(const Tensor& t);
};

// One recorded maneuver: the expert trajectory in the t0 ego frame plus the
// sensor view captured at every trajectory step (in that step's own frame).
struct DatasetTrajectory {
  uint64_t seed = 0;
  InputMode mode = InputMode::DirectBev;
  Scenario scenario;
  std::vector<double> ts, xs, ys, headings;
  std::vector<SensorBlob> sensors;

  size_t steps() const { return xs.size(); }
};

using Dataset = std::vector<DatasetTrajectory>;

uint64_t derive_seed(uint64_t dataset_seed, int64_t index);

DatasetTrajectory generate_trajectory(uint64_t dataset_seed, int64_t index, InputMode mode,
                                      const ModelConfig& cfg, const CameraRig* rig);

// count scenarios from one seed; pure function of (count, seed, mode, cfg).
Dataset generate_dataset(int64_t count, uint64_t seed, InputMode mode,
                         const ModelConfig& cfg, const CameraRig* rig = nullptr);

// On-disk layout (documented in docs/file-formats.md):
//   <dir>/rig.json                      camera mode only
//   <dir>/traj_NNNNNN/meta.json         slot, gear, seed, scenario geometry
//   <dir>/traj_NNNNNN/points.csv        t,x,y,heading rows in the t0 frame
//   <dir>/traj_NNNNNN/step_NNN.f32      raw BEV grid (magic F32A + shape)
//   <dir>/traj_NNNNNN/step_NNN_<cam>.png  camera mode images
void write_trajectory_dir(const DatasetTrajectory& traj, const std::string& dir,
                          const CameraRig* rig);
void write_dataset(const Dataset& data, const std::string& dir, const CameraRig* rig = nullptr);
Dataset load_dataset(const std::string& dir);
DatasetTrajectory load_trajectory_dir(const std::string& dir, InputMode mode,
                                      const CameraRig* rig);

void write_f32_array(const std::string& path, const std::vector<int64_t>& shape,
                     const std::vector<float>& data);
std::pair<std::vector<int64_t>, std::vector<float>> read_f32_array(const std::string& path);

}  // namespace parknet
