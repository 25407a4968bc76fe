#include "parknet/camera.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace parknet {

namespace {

std::array<double, 3> mat_vec(const std::array<double, 9>& m, const std::array<double, 3>& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

std::array<double, 3> mat_t_vec(const std::array<double, 9>& m,
                                const std::array<double, 3>& v) {
  return {m[0] * v[0] + m[3] * v[1] + m[6] * v[2],
          m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
          m[2] * v[0] + m[5] * v[1] + m[8] * v[2]};
}

}  // namespace

void Camera::validate() const {
  if (fx == 0.0 || fy == 0.0) {
    throw std::invalid_argument("camera " + name + ": zero focal length");
  }
  if (image_width < 1 || image_height < 1) {
    throw std::invalid_argument("camera " + name + ": invalid image size");
  }
  // rigid transform: R R^T == I
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += rotation[r * 3 + k] * rotation[c * 3 + k];
      const double expect = r == c ? 1.0 : 0.0;
      if (std::abs(acc - expect) > 1e-6) {
        throw std::invalid_argument("camera " + name + ": rotation is not orthonormal");
      }
    }
  }
}

std::array<double, 3> Camera::unproject(double u, double v, double depth) const {
  const std::array<double, 3> p_cam = {(u - cx) / fx * depth, (v - cy) / fy * depth, depth};
  auto p = mat_vec(rotation, p_cam);
  return {p[0] + translation[0], p[1] + translation[1], p[2] + translation[2]};
}

std::array<double, 3> Camera::project(const std::array<double, 3>& p_ego) const {
  const std::array<double, 3> rel = {p_ego[0] - translation[0], p_ego[1] - translation[1],
                                     p_ego[2] - translation[2]};
  const auto p_cam = mat_t_vec(rotation, rel);
  if (p_cam[2] <= 0.0) return {0.0, 0.0, p_cam[2]};
  return {fx * p_cam[0] / p_cam[2] + cx, fy * p_cam[1] / p_cam[2] + cy, p_cam[2]};
}

void CameraRig::validate() const {
  if (cameras.empty()) throw std::invalid_argument("camera rig has no cameras");
  for (const auto& c : cameras) c.validate();
}

CameraRig load_rig_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("rig: cannot open: " + path);
  nlohmann::json j;
  is >> j;
  CameraRig rig;
  for (const auto& cj : j.at("cameras")) {
    Camera c;
    c.name = cj.at("name").get<std::string>();
    c.fx = cj.at("fx").get<double>();
    c.fy = cj.at("fy").get<double>();
    c.cx = cj.at("cx").get<double>();
    c.cy = cj.at("cy").get<double>();
    c.image_width = cj.at("image_width").get<int64_t>();
    c.image_height = cj.at("image_height").get<int64_t>();
    const auto rot = cj.at("rotation").get<std::vector<double>>();
    const auto tr = cj.at("translation").get<std::vector<double>>();
    if (rot.size() != 9 || tr.size() != 3) {
      throw std::runtime_error("rig: camera " + c.name + " has malformed extrinsics");
    }
    std::copy(rot.begin(), rot.end(), c.rotation.begin());
    std::copy(tr.begin(), tr.end(), c.translation.begin());
    rig.cameras.push_back(std::move(c));
  }
  rig.validate();
  return rig;
}

void save_rig_json(const CameraRig& rig, const std::string& path) {
  nlohmann::json j;
  j["cameras"] = nlohmann::json::array();
  for (const auto& c : rig.cameras) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["fx"] = c.fx;
    cj["fy"] = c.fy;
    cj["cx"] = c.cx;
    cj["cy"] = c.cy;
    cj["image_width"] = c.image_width;
    cj["image_height"] = c.image_height;
    cj["rotation"] = std::vector<double>(c.rotation.begin(), c.rotation.end());
    cj["translation"] = std::vector<double>(c.translation.begin(), c.translation.end());
    j["cameras"].push_back(std::move(cj));
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("rig: cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

CameraRig make_default_rig(int64_t image_size) {
  // Ego frame: +x forward, +y left, +z up. Camera frame: +x right, +y down,
  // +z along the optical axis.
  struct Mount {
    const char* name;
    double yaw;
    std::array<double, 3> position;
  };
  const double pitch_down = 0.6;  // radians below horizontal
  const Mount mounts[] = {
      {"front", 0.0, {2.0, 0.0, 1.2}},
      {"left", M_PI / 2.0, {0.0, 0.8, 1.2}},
      {"rear", M_PI, {-2.0, 0.0, 1.2}},
      {"right", -M_PI / 2.0, {0.0, -0.8, 1.2}},
  };
  CameraRig rig;
  for (const auto& m : mounts) {
    Camera c;
    c.name = m.name;
    c.fx = c.fy = static_cast<double>(image_size) / 2.0;  // 90 degree fov
    c.cx = c.cy = (static_cast<double>(image_size) - 1.0) / 2.0;
    c.image_width = c.image_height = image_size;
    const double ca = std::cos(pitch_down), sa = std::sin(pitch_down);
    const double cy_ = std::cos(m.yaw), sy = std::sin(m.yaw);
    // camera axes in ego coordinates (columns of camera-to-ego rotation)
    const std::array<double, 3> x_cam = {sy, -cy_, 0.0};
    const std::array<double, 3> z_cam = {ca * cy_, ca * sy, -sa};
    const std::array<double, 3> y_cam = {
        z_cam[1] * x_cam[2] - z_cam[2] * x_cam[1],
        z_cam[2] * x_cam[0] - z_cam[0] * x_cam[2],
        z_cam[0] * x_cam[1] - z_cam[1] * x_cam[0],
    };
    c.rotation = {x_cam[0], y_cam[0], z_cam[0],
                  x_cam[1], y_cam[1], z_cam[1],
                  x_cam[2], y_cam[2], z_cam[2]};
    c.translation = m.position;
    rig.cameras.push_back(std::move(c));
  }
  rig.validate();
  return rig;
}

}  // namespace parknet
