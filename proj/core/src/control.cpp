#include "parknet/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace parknet {

double pid_step(double target, double feedback, PidState& state, const PidGains& gains,
                double dt) {
  const double error = target - feedback;
  state.integral += error * dt;
  if (gains.integral_limit > 0.0) {
    state.integral = std::clamp(state.integral, -gains.integral_limit, gains.integral_limit);
  }
  const double derivative = state.has_prev ? (error - state.prev_error) / dt : 0.0;
  state.prev_error = error;
  state.has_prev = true;
  return gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
}

namespace {

struct PathGeometry {
  size_t nearest = 0;
  double cross_track = 0.0;  // left of travel positive
  double heading_error = 0.0;
  double curvature = 0.0;
  double remaining = 0.0;  // arc length to the end
};

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 : std::sin(x) / x; }

size_t nearest_index(const Trajectory& path, double x, double y) {
  size_t best = 0;
  double best_d = 1e300;
  for (size_t i = 0; i < path.points.size(); ++i) {
    const double d = std::hypot(path.points[i].x - x, path.points[i].y - y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// unit tangent at index i, oriented along traversal order
std::pair<double, double> tangent_at(const Trajectory& path, size_t i) {
  const size_t n = path.points.size();
  const size_t a = i > 0 ? i - 1 : 0;
  const size_t b = i + 1 < n ? i + 1 : n - 1;
  double dx = path.points[b].x - path.points[a].x;
  double dy = path.points[b].y - path.points[a].y;
  const double len = std::hypot(dx, dy);
  if (len < 1e-12) return {1.0, 0.0};
  return {dx / len, dy / len};
}

// signed Menger curvature of the triple around index i
double curvature_at(const Trajectory& path, size_t i) {
  const size_t n = path.points.size();
  if (n < 3) return 0.0;
  size_t m = std::clamp<size_t>(i, 1, n - 2);
  const auto& p1 = path.points[m - 1];
  const auto& p2 = path.points[m];
  const auto& p3 = path.points[m + 1];
  const double ax = p2.x - p1.x, ay = p2.y - p1.y;
  const double bx = p3.x - p2.x, by = p3.y - p2.y;
  const double cross = ax * by - ay * bx;
  const double la = std::hypot(ax, ay), lb = std::hypot(bx, by);
  const double lc = std::hypot(p3.x - p1.x, p3.y - p1.y);
  if (la < 1e-9 || lb < 1e-9 || lc < 1e-9) return 0.0;
  return 2.0 * cross / (la * lb * lc);
}

PathGeometry path_geometry(const Trajectory& path, const VehicleState& state) {
  PathGeometry g;
  g.nearest = nearest_index(path, state.pose.x, state.pose.y);
  const auto [tx, ty] = tangent_at(path, g.nearest);
  const auto& np = path.points[g.nearest];
  const double dx = state.pose.x - np.x;
  const double dy = state.pose.y - np.y;
  g.cross_track = tx * dy - ty * dx;
  const double motion_heading =
      state.speed < 0.0 ? wrap_angle(state.pose.heading + M_PI) : state.pose.heading;
  g.heading_error = wrap_angle(motion_heading - std::atan2(ty, tx));
  g.curvature = curvature_at(path, g.nearest);
  g.remaining = std::hypot(path.points.back().x - state.pose.x,
                           path.points.back().y - state.pose.y);
  double arc = 0.0;
  for (size_t i = g.nearest; i + 1 < path.points.size(); ++i) {
    arc += std::hypot(path.points[i + 1].x - path.points[i].x,
                      path.points[i + 1].y - path.points[i].y);
  }
  g.remaining = std::max(g.remaining, arc);
  return g;
}

}  // namespace

double rwf_steering(const Trajectory& path, const VehicleState& state,
                    const ControllerConfig& cfg, double* cross_track) {
  if (path.empty()) throw std::invalid_argument("rwf_steering: empty path");
  const PathGeometry g = path_geometry(path, state);
  if (cross_track) *cross_track = g.cross_track;
  if (state.speed == 0.0) return state.steer;

  const double v_abs = std::abs(state.speed);
  const double denom = 1.0 - g.curvature * g.cross_track;
  const double feedforward =
      std::abs(denom) > 1e-6
          ? v_abs * g.curvature * std::cos(g.heading_error) / denom
          : 0.0;
  const double omega = feedforward - cfg.k_theta * v_abs * g.heading_error -
                       cfg.k_e * v_abs * sinc(g.heading_error) * g.cross_track;
  const double steer = std::atan(omega * cfg.wheelbase / state.speed);
  return std::clamp(steer, -cfg.max_steer, cfg.max_steer);
}

VehicleState bicycle_step(const VehicleState& state, double accel, double steer_rate,
                          const ControllerConfig& cfg) {
  VehicleState next = state;
  const double dt = cfg.timestep;
  next.pose.x += state.speed * std::cos(state.pose.heading) * dt;
  next.pose.y += state.speed * std::sin(state.pose.heading) * dt;
  next.pose.heading =
      wrap_angle(state.pose.heading + state.speed * std::tan(state.steer) / cfg.wheelbase * dt);
  next.speed = state.speed + accel * dt;
  next.steer = std::clamp(state.steer + steer_rate * dt, -cfg.max_steer, cfg.max_steer);
  return next;
}

SimReport simulate_parking(const Trajectory& path, VehicleState state,
                           const ControllerConfig& cfg, std::vector<TraceRow>* trace) {
  if (!(cfg.timestep > 0.0)) throw std::invalid_argument("simulate: timestep must be positive");
  SimReport report;
  if (path.empty() ||
      (path.size() == 1 && std::hypot(path.points[0].x - state.pose.x,
                                      path.points[0].y - state.pose.y) < cfg.stop_distance)) {
    report.converged = true;
    return report;
  }

  // gear from the path's initial direction relative to the vehicle heading
  double dir = 1.0;
  for (size_t i = 1; i < path.points.size(); ++i) {
    const double dx = path.points[i].x - path.points[0].x;
    const double dy = path.points[i].y - path.points[0].y;
    if (std::hypot(dx, dy) > 1e-6) {
      const double along =
          dx * std::cos(state.pose.heading) + dy * std::sin(state.pose.heading);
      dir = along < 0.0 ? -1.0 : 1.0;
      break;
    }
  }

  PidState speed_state, steer_state;
  const auto& end = path.points.back();
  double end_tangent;
  {
    const auto [tx, ty] = tangent_at(path, path.points.size() - 1);
    end_tangent = std::atan2(ty, tx);
  }

  double t = 0.0;
  while (t < cfg.timeout) {
    const PathGeometry g = path_geometry(path, state);
    const double dist_end = std::hypot(end.x - state.pose.x, end.y - state.pose.y);
    if (dist_end <= cfg.stop_distance) {
      report.converged = true;
      break;
    }
    const double taper =
        std::clamp(g.remaining / cfg.slow_radius, cfg.creep_fraction, 1.0);
    const double v_target = dir * cfg.target_speed * taper;

    const double accel = std::clamp(pid_step(v_target, state.speed, speed_state, cfg.speed_pid,
                                             cfg.timestep),
                                    -cfg.max_accel, cfg.max_accel);
    const double steer_target = rwf_steering(path, state, cfg);
    const double steer_rate = std::clamp(
        pid_step(steer_target, state.steer, steer_state, cfg.steer_pid, cfg.timestep),
        -cfg.max_steer_rate, cfg.max_steer_rate);

    if (trace) {
      trace->push_back(TraceRow{t, state.pose.x, state.pose.y, state.pose.heading, state.speed,
                                state.steer, g.cross_track});
    }
    state = bicycle_step(state, accel, steer_rate, cfg);
    t += cfg.timestep;
  }

  report.sim_time = t;
  report.position_error = std::hypot(end.x - state.pose.x, end.y - state.pose.y);
  const double motion_heading =
      dir < 0.0 ? wrap_angle(state.pose.heading + M_PI) : state.pose.heading;
  report.heading_error = std::abs(wrap_angle(motion_heading - end_tangent));
  return report;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("trace: cannot open for writing: " + path);
  os << "t,x,y,heading,speed,steer,cross_track\n" << std::setprecision(17);
  for (const auto& r : trace) {
    os << r.t << "," << r.x << "," << r.y << "," << r.heading << "," << r.speed << ","
       << r.steer << "," << r.cross_track << "\n";
  }
}

}  // namespace parknet
