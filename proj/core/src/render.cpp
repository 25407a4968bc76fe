#include "parknet/render.hpp"

#include <cmath>

namespace parknet {

namespace {

constexpr double kLineHalfWidth = 0.08;  // meters

struct FrameXf {
  // current-ego-frame point -> t0 frame
  double c, s, px, py;
  void to_world(double x, double y, double& wx, double& wy) const {
    wx = c * x - s * y + px;
    wy = s * x + c * y + py;
  }
};

bool hits_marking(const Scenario& sc, double wx, double wy) {
  for (const auto& line : sc.slot_lines) {
    if (line.distance(wx, wy) <= kLineHalfWidth) return true;
  }
  for (const auto& line : sc.lane_lines) {
    if (line.distance(wx, wy) <= kLineHalfWidth) return true;
  }
  return false;
}

bool hits_obstacle(const Scenario& sc, double wx, double wy) {
  for (const auto& o : sc.obstacles) {
    if (o.contains(wx, wy)) return true;
  }
  return false;
}

}  // namespace

Tensor render_bev(const Scenario& scenario, const Pose2d& pose, const GridSpec& grid) {
  grid.validate();
  Tensor out = Tensor::zeros({2, grid.height, grid.width});
  const FrameXf xf{std::cos(pose.heading), std::sin(pose.heading), pose.x, pose.y};
  double* occ = out.data().data();
  double* mark = occ + grid.cells();
  for (int64_t i = 0; i < grid.height; ++i) {
    for (int64_t j = 0; j < grid.width; ++j) {
      const auto [x, y] = grid.pixel_to_metric(static_cast<double>(i), static_cast<double>(j));
      double wx, wy;
      xf.to_world(x, y, wx, wy);
      const int64_t off = i * grid.width + j;
      if (hits_obstacle(scenario, wx, wy)) occ[off] = 1.0;
      if (hits_marking(scenario, wx, wy)) mark[off] = 1.0;
    }
  }
  return out;
}

Tensor render_scene(const Scenario& scenario, const Pose2d& pose, const CameraRig& rig) {
  rig.validate();
  const int64_t cams = static_cast<int64_t>(rig.cameras.size());
  const int64_t h = rig.cameras[0].image_height;
  const int64_t w = rig.cameras[0].image_width;
  Tensor out = Tensor::zeros({cams, 3, h, w});
  const FrameXf xf{std::cos(pose.heading), std::sin(pose.heading), pose.x, pose.y};

  const double ground[3] = {0.35, 0.35, 0.35};
  const double line[3] = {0.92, 0.92, 0.92};
  const double obstacle[3] = {0.12, 0.22, 0.70};
  const double sky[3] = {0.55, 0.70, 0.90};

  for (int64_t c = 0; c < cams; ++c) {
    const Camera& cam = rig.cameras[static_cast<size_t>(c)];
    double* plane = out.data().data() + c * 3 * h * w;
    for (int64_t v = 0; v < h; ++v) {
      for (int64_t u = 0; u < w; ++u) {
        // ray through the pixel in the camera's ego frame
        const std::array<double, 3> d_cam = {(static_cast<double>(u) - cam.cx) / cam.fx,
                                             (static_cast<double>(v) - cam.cy) / cam.fy, 1.0};
        std::array<double, 3> d_ego{};
        for (int r = 0; r < 3; ++r) {
          d_ego[r] = cam.rotation[r * 3 + 0] * d_cam[0] +
                     cam.rotation[r * 3 + 1] * d_cam[1] + cam.rotation[r * 3 + 2] * d_cam[2];
        }
        const double* color = sky;
        if (d_ego[2] < -1e-9) {
          const double t = -cam.translation[2] / d_ego[2];
          const double gx = cam.translation[0] + t * d_ego[0];
          const double gy = cam.translation[1] + t * d_ego[1];
          double wx, wy;
          xf.to_world(gx, gy, wx, wy);
          if (hits_obstacle(scenario, wx, wy)) {
            color = obstacle;
          } else if (hits_marking(scenario, wx, wy)) {
            color = line;
          } else {
            color = ground;
          }
        }
        for (int ch = 0; ch < 3; ++ch) {
          plane[ch * h * w + v * w + u] = color[ch];
        }
      }
    }
  }
  return out;
}

}  // namespace parknet
