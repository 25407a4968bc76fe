#pragma once

#include "parknet/camera.hpp"
#include "parknet/grid.hpp"
#include "parknet/scenario.hpp"
#include "parknet/tensor.hpp"

namespace parknet {

// Top-down rasterization of the scene as observed from `pose` (a pose in the
// t0 frame; the output grid is in that pose's ego frame). Channel 0 carries
// obstacle occupancy, channel 1 slot and lane markings. Output (2, H, W).
Tensor render_bev(const Scenario& scenario, const Pose2d& pose, const GridSpec& grid);

// Flat-shaded pinhole render of the same scene: ground plane, painted
// markings, obstacle boxes. Output (cams, 3, H, W) in [0, 1]; deterministic.
Tensor render_scene(const Scenario& scenario, const Pose2d& pose, const CameraRig& rig);

}  // namespace parknet
