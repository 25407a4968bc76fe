#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parknet/bev.hpp"
#include "parknet/camera.hpp"
#include "parknet/config.hpp"
#include "parknet/decoder.hpp"
#include "parknet/grid.hpp"
#include "parknet/nn.hpp"
#include "parknet/trajectory.hpp"

namespace parknet {

// One sample's sensor input plus the user-selected slot (ego meters).
struct SampleInput {
  Tensor bev;     // (2, H, W) occupancy, direct-bev mode
  Tensor images;  // (cams, 3, h, w) pixel tensor, camera mode
  double slot_x = 0.0;
  double slot_y = 0.0;
};

// Full camera-to-trajectory network: slot query + BEV encoding + dual
// decoders. Construction is seed-deterministic; parameters live in an
// ordered registry shared with the optimizer and checkpoints.
class ParkingModel {
 public:
  ParkingModel(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamMap& params() { return params_; }
  const ParamMap& params() const { return params_; }
  const TrajectoryDecoder& decoder() const { return decoder_; }
  const BevEncoder& encoder() const { return encoder_; }

  void set_rig(CameraRig rig) { rig_ = std::move(rig); }
  const CameraRig& rig() const { return rig_; }

  WeightMap make_query(double slot_x, double slot_y) const;

  // Sensor input -> raw BEV (direct passthrough or backbone + lift-splat).
  BevGrid build_bev(const SampleInput& in) const;
  EncoderOutput encode(const SampleInput& in) const;
  EncoderContext make_context(const EncoderOutput& enc) const;
  EncoderContext encode_context(const SampleInput& in) const;

  // Teacher-forced forward over decoder input sequences.
  DecoderOutput forward_teacher(const EncoderContext& ctx,
                                const std::vector<int64_t>& x_in,
                                const std::vector<int64_t>& y_in) const;

  // Greedy autoregressive prediction, detokenized to metric waypoints.
  // Optional outputs: per-step generation trace and predicted maps.
  Trajectory generate(const SampleInput& in, std::vector<GenerationStep>* trace = nullptr,
                      std::vector<WeightMap>* step_maps = nullptr) const;

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  ModelConfig cfg_;
  ParamMap params_;
  ImageBackbone backbone_;
  BevEncoder encoder_;
  TrajectoryDecoder decoder_;
  Conv2d refine_embed_;  // direct mode: occupancy channels -> C_bev (1x1)
  CameraRig rig_;
};

}  // namespace parknet
