#include "parknet/trajectory.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace parknet {

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("trajectory: cannot open for writing: " + path);
  os << "t,x,y\n";
  os << std::setprecision(17);
  for (const auto& p : traj.points) {
    os << p.t << "," << p.x << "," << p.y << "\n";
  }
  if (!os) throw std::runtime_error("trajectory: write failed: " + path);
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("trajectory: cannot open: " + path);
  Trajectory traj;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trajectory: empty file: " + path);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    TrajectoryPoint p;
    char c1 = 0, c2 = 0;
    if (!(row >> p.t >> c1 >> p.x >> c2 >> p.y) || c1 != ',' || c2 != ',') {
      throw std::runtime_error("trajectory: malformed row in " + path + ": " + line);
    }
    traj.points.push_back(p);
  }
  return traj;
}

}  // namespace parknet
