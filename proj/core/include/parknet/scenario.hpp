#pragma once

#include <cstdint>
#include <vector>

#include "parknet/rng.hpp"

namespace parknet {

struct Pose2d {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, wrapped to (-pi, pi]
};

double wrap_angle(double a);

// Oriented rectangle on the ground plane (parked vehicles and similar).
struct ObstacleRect {
  double x = 0.0, y = 0.0;  // center, meters
  double half_length = 2.1;  // along heading
  double half_width = 0.9;
  double heading = 0.0;

  bool contains(double px, double py) const;
  // Euclidean distance from a point to the rectangle (0 inside).
  double distance(double px, double py) const;
};

struct LineSegment {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double distance(double px, double py) const;
};

enum class Gear { Forward, Reverse };

// Everything is expressed in the ego frame at maneuver start (t0): the ego
// begins at the origin with heading 0.
struct Scenario {
  Pose2d slot;  // parked end pose
  Gear gear = Gear::Forward;
  std::vector<ObstacleRect> obstacles;
  std::vector<LineSegment> lane_lines;
  std::vector<LineSegment> slot_lines;  // U-shaped bay marking
  uint64_t seed = 0;
};

struct ExpertWaypoint {
  double x = 0.0, y = 0.0;
  double heading = 0.0;   // vehicle heading (not motion direction)
  double curvature = 0.0; // signed, of the driven path
};

struct ExpertTrajectory {
  std::vector<ExpertWaypoint> waypoints;  // fixed arc-length spacing
  Gear gear = Gear::Forward;
  double spacing = 0.3;  // meters between consecutive waypoints
};

struct PlannerConfig {
  double min_turn_radius = 4.5;  // meters
  double wheelbase = 2.7;
  double waypoint_spacing = 0.3;
  double clearance = 0.25;  // obstacle distance from the path
};

// Straight-arc-straight path from the origin pose to the slot pose, driven
// entirely in the scenario's gear. Curvature never exceeds
// 1/min_turn_radius; the endpoint matches the slot pose to numerical
// precision. Throws on geometry the single-arc family cannot reach.
ExpertTrajectory plan_expert(const Scenario& scenario, const PlannerConfig& cfg = {});

struct ScenarioSamplerConfig {
  PlannerConfig planner;
  double range_x = 10.0;  // scene must stay inside the BEV metric range
  double range_y = 10.0;
  double margin = 1.2;    // keep slots this far inside the range
  double max_pre_straight = 2.5;
  double max_post_straight = 2.0;
};

// Deterministic per (seed): draws maneuver geometry, derives the slot pose
// from it (so the planner always succeeds), and places flanking parked cars
// that keep clear of the expert path.
Scenario sample_scenario(uint64_t seed, const ScenarioSamplerConfig& cfg = {});

}  // namespace parknet
