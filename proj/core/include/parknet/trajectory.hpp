#pragma once

#include <string>
#include <vector>

namespace parknet {

struct TrajectoryPoint {
  double t = 0.0;  // seconds from maneuver start
  double x = 0.0;  // meters, ego frame at t0
  double y = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;

  bool empty() const { return points.empty(); }
  size_t size() const { return points.size(); }
};

// CSV with header "t,x,y"; one row per point.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace parknet
