#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace parknet {

// Pinhole camera with a rigid camera-to-ego transform:
//   p_ego = rotation * p_cam + translation.
// Camera frame: +z forward along the optical axis, +x right, +y down.
struct Camera {
  std::string name;
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  int64_t image_width = 0, image_height = 0;
  std::array<double, 9> rotation{};  // row-major 3x3, camera-to-ego
  std::array<double, 3> translation{};  // meters, ego frame

  void validate() const;

  // Unproject pixel (u, v) at depth z (meters along the optical axis) into
  // the ego frame.
  std::array<double, 3> unproject(double u, double v, double depth) const;
  // Project an ego-frame point; returns {u, v, depth}; depth <= 0 means the
  // point is behind the camera.
  std::array<double, 3> project(const std::array<double, 3>& p_ego) const;
};

struct CameraRig {
  std::vector<Camera> cameras;
  void validate() const;
};

// JSON schema (documented with a worked example in docs/file-formats.md):
// { "cameras": [ { "name", "fx", "fy", "cx", "cy", "image_width",
//                  "image_height", "rotation" (9, row-major, camera-to-ego),
//                  "translation" (3, meters) }, ... ] }
CameraRig load_rig_json(const std::string& path);
void save_rig_json(const CameraRig& rig, const std::string& path);

// Four-camera surround rig (front/left/rear/right) with square images of the
// given size, pitched down toward the ground plane.
CameraRig make_default_rig(int64_t image_size);

}  // namespace parknet
