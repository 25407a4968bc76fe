#pragma once

#include <string>
#include <vector>

#include "parknet/scenario.hpp"
#include "parknet/trajectory.hpp"

namespace parknet {

// Pose in the t0 ego frame; heading wrapped to (-pi, pi].
using EgoPose = Pose2d;

struct VehicleState {
  EgoPose pose;
  double speed = 0.0;  // m/s, signed (negative while reversing)
  double steer = 0.0;  // radians at the front axle
};

struct PidGains {
  double kp = 0.0, ki = 0.0, kd = 0.0;
  double integral_limit = 0.0;  // 0 disables clamping
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

// Standard positional PID with integral clamping; returns the actuation.
double pid_step(double target, double feedback, PidState& state, const PidGains& gains,
                double dt);

struct ControllerConfig {
  double k_e = 0.5;      // cross-track gain
  double k_theta = 1.0;  // heading gain
  PidGains speed_pid{1.5, 0.2, 0.0, 2.0};    // speed -> acceleration
  PidGains steer_pid{8.0, 0.0, 0.0, 0.0};    // steering -> steering rate
  double target_speed = 1.0;  // m/s
  double wheelbase = 2.7;     // meters
  double timestep = 0.01;     // seconds
  double max_steer = 0.6;     // radians
  double max_accel = 2.0;     // m/s^2
  double max_steer_rate = 2.0;  // rad/s
  double timeout = 90.0;        // seconds of simulated time
  double stop_distance = 0.05;  // termination distance to the path end
  double slow_radius = 1.2;     // speed tapers inside this distance of the end
  double creep_fraction = 0.12; // lowest speed fraction while approaching
};

// Rear-wheel-feedback steering: nearest path point to the rear axle gives
// cross-track error e, heading error theta_e (relative to the direction of
// travel) and local curvature kappa; the commanded yaw rate is
//   omega = |V| kappa cos(theta_e) / (1 - kappa e)
//         - k_theta |V| theta_e - k_e |V| sinc(theta_e) e,
// converted to a front steering angle atan(omega L / V) and clamped.
// V = 0 returns the previous steering angle unchanged.
double rwf_steering(const Trajectory& path, const VehicleState& state,
                    const ControllerConfig& cfg, double* cross_track = nullptr);

// One forward-Euler step of the kinematic bicycle about the rear axle:
// x' = V cos(h), y' = V sin(h), h' = V tan(steer) / L.
VehicleState bicycle_step(const VehicleState& state, double accel, double steer_rate,
                          const ControllerConfig& cfg);

struct TraceRow {
  double t = 0, x = 0, y = 0, heading = 0, speed = 0, steer = 0, cross_track = 0;
};

struct SimReport {
  bool converged = false;
  double position_error = 0.0;  // meters to the path endpoint
  double heading_error = 0.0;   // radians to the endpoint tangent
  double sim_time = 0.0;
};

// Closed-loop execution of a predicted path expressed in the t0 ego frame.
// The single t0 prediction is tracked throughout (no replanning). The gear
// is inferred from the path's initial direction relative to the vehicle
// heading. Timeout is reported, not thrown.
SimReport simulate_parking(const Trajectory& path, VehicleState initial,
                           const ControllerConfig& cfg,
                           std::vector<TraceRow>* trace = nullptr);

// CSV: t,x,y,heading,speed,steer,cross_track.
void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace parknet
