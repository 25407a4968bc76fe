#include "parknet/scenario.hpp"

#include <cmath>
#include <stdexcept>

namespace parknet {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

bool ObstacleRect::contains(double px, double py) const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double dx = px - x, dy = py - y;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= half_length && std::abs(ly) <= half_width;
}

double ObstacleRect::distance(double px, double py) const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double dx = px - x, dy = py - y;
  const double lx = std::abs(c * dx + s * dy) - half_length;
  const double ly = std::abs(-s * dx + c * dy) - half_width;
  const double ox = std::max(lx, 0.0), oy = std::max(ly, 0.0);
  return std::sqrt(ox * ox + oy * oy);
}

double LineSegment::distance(double px, double py) const {
  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = x0 + t * dx, cy = y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

namespace {

struct SasPath {
  double pre = 0.0;     // straight before the arc
  double radius = 0.0;  // 0 marks a straight-only path
  double angle = 0.0;   // unsigned arc angle
  int dir = 1;          // +1 left, -1 right (in the motion frame)
  double post = 0.0;    // straight after the arc
  double length() const { return pre + radius * angle + post; }
};

struct MotionPose {
  double x, y, heading, curvature;
};

MotionPose sas_pose(const SasPath& p, double s) {
  if (s <= p.pre || p.radius == 0.0) {
    return {s, 0.0, 0.0, 0.0};
  }
  const double arc_len = p.radius * p.angle;
  const double delta = p.dir * p.angle;
  const double ax = p.pre + p.radius * std::sin(p.angle);
  const double ay = p.dir * p.radius * (1.0 - std::cos(p.angle));
  if (s <= p.pre + arc_len) {
    const double a = (s - p.pre) / p.radius;
    return {p.pre + p.radius * std::sin(a), p.dir * p.radius * (1.0 - std::cos(a)),
            p.dir * a, p.dir / p.radius};
  }
  const double u = s - p.pre - arc_len;
  return {ax + u * std::cos(delta), ay + u * std::sin(delta), delta, 0.0};
}

// Solve straight-arc-straight from the origin (motion heading 0) to the
// motion-frame target pose, always at the minimum turn radius.
SasPath solve_sas(double tx, double ty, double target_heading, double r_min) {
  SasPath p;
  const double delta = wrap_angle(target_heading);
  if (std::abs(delta) < 1e-12) {
    if (std::abs(ty) > 1e-9 || tx < -1e-9) {
      throw std::runtime_error("planner: aligned target is laterally offset; "
                               "unreachable with a single arc");
    }
    p.pre = std::max(tx, 0.0);
    return p;
  }
  p.dir = delta > 0.0 ? 1 : -1;
  p.angle = std::abs(delta);
  p.radius = r_min;
  const double sin_phi = std::sin(p.angle);
  const double one_cos = 1.0 - std::cos(p.angle);
  p.post = (p.dir * ty - r_min * one_cos) / sin_phi;
  p.pre = tx - r_min * sin_phi - p.post * std::cos(p.angle);
  const double tol = 1e-9;
  if (p.post < -tol || p.pre < -tol) {
    throw std::runtime_error("planner: slot pose unreachable within the turn-radius bound");
  }
  p.post = std::max(p.post, 0.0);
  p.pre = std::max(p.pre, 0.0);
  return p;
}

}  // namespace

ExpertTrajectory plan_expert(const Scenario& scenario, const PlannerConfig& cfg) {
  if (!(cfg.min_turn_radius > 0.0) || !(cfg.waypoint_spacing > 0.0)) {
    throw std::invalid_argument("planner: invalid configuration");
  }
  const bool reverse = scenario.gear == Gear::Reverse;
  // motion frame: rotate by -u0 where u0 is the initial motion direction
  const double tx = reverse ? -scenario.slot.x : scenario.slot.x;
  const double ty = reverse ? -scenario.slot.y : scenario.slot.y;
  const double th = wrap_angle(scenario.slot.heading);

  const SasPath path = solve_sas(tx, ty, th, cfg.min_turn_radius);
  const double total = path.length();

  ExpertTrajectory traj;
  traj.gear = scenario.gear;
  const int64_t n = std::max<int64_t>(2, static_cast<int64_t>(std::ceil(total / cfg.waypoint_spacing)) + 1);
  traj.spacing = total / static_cast<double>(n - 1);
  traj.waypoints.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double s = total * static_cast<double>(i) / static_cast<double>(n - 1);
    const MotionPose m = sas_pose(path, s);
    ExpertWaypoint w;
    // back to the t0 frame; vehicle heading equals the motion-frame heading
    // in both gears (reversing rotates both position and motion by pi)
    w.x = reverse ? -m.x : m.x;
    w.y = reverse ? -m.y : m.y;
    w.heading = wrap_angle(m.heading);
    w.curvature = m.curvature;
    traj.waypoints.push_back(w);
  }
  return traj;
}

namespace {

void add_bay_lines(Scenario& sc) {
  const double bay_half_w = 1.3;
  const double bay_half_d = 2.6;
  const double c = std::cos(sc.slot.heading), s = std::sin(sc.slot.heading);
  const double fx = sc.slot.x + c * bay_half_d, fy = sc.slot.y + s * bay_half_d;
  const double bx = sc.slot.x - c * bay_half_d, by = sc.slot.y - s * bay_half_d;
  const double px = -s, py = c;  // unit perpendicular
  // two side lines and the back line; the bay mouth stays open
  sc.slot_lines.push_back({fx + px * bay_half_w, fy + py * bay_half_w,
                           bx + px * bay_half_w, by + py * bay_half_w});
  sc.slot_lines.push_back({fx - px * bay_half_w, fy - py * bay_half_w,
                           bx - px * bay_half_w, by - py * bay_half_w});
  sc.slot_lines.push_back({bx + px * bay_half_w, by + py * bay_half_w,
                           bx - px * bay_half_w, by - py * bay_half_w});
}

double path_distance(const ExpertTrajectory& traj, const ObstacleRect& rect) {
  double best = 1e300;
  for (const auto& w : traj.waypoints) best = std::min(best, rect.distance(w.x, w.y));
  return best;
}

}  // namespace

Scenario sample_scenario(uint64_t seed, const ScenarioSamplerConfig& cfg) {
  Rng rng(seed);
  const double r_min = cfg.planner.min_turn_radius;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Scenario sc;
    sc.seed = seed;
    sc.gear = rng.bernoulli(0.5) ? Gear::Reverse : Gear::Forward;
    const bool straight = rng.bernoulli(0.15);
    const int dir = rng.bernoulli(0.5) ? 1 : -1;
    const double phi = straight ? 0.0 : rng.uniform(0.35, M_PI / 2.0);
    const double radius = rng.uniform(r_min, r_min * 1.5);
    const double pre = rng.uniform(0.4, cfg.max_pre_straight);
    const double post = straight ? rng.uniform(2.0, 6.0)
                                 : rng.uniform(0.8, cfg.max_post_straight);

    // forward-construct the end pose in the motion frame
    const double delta = dir * phi;
    const double ex = pre + radius * std::sin(phi) + post * std::cos(delta);
    const double ey = dir * radius * (1.0 - std::cos(phi)) + post * std::sin(delta);
    const bool reverse = sc.gear == Gear::Reverse;
    sc.slot.x = reverse ? -ex : ex;
    sc.slot.y = reverse ? -ey : ey;
    sc.slot.heading = wrap_angle(delta);

    const double lim_x = cfg.range_x - cfg.margin;
    const double lim_y = cfg.range_y - cfg.margin;
    if (std::abs(sc.slot.x) > lim_x || std::abs(sc.slot.y) > lim_y) continue;

    ExpertTrajectory expert;
    try {
      expert = plan_expert(sc, cfg.planner);
    } catch (const std::runtime_error&) {
      continue;
    }
    bool in_range = true;
    for (const auto& w : expert.waypoints) {
      if (std::abs(w.x) > cfg.range_x - 0.4 || std::abs(w.y) > cfg.range_y - 0.4) {
        in_range = false;
        break;
      }
    }
    if (!in_range) continue;

    add_bay_lines(sc);

    // flanking parked cars in the adjacent bays
    const double px = -std::sin(sc.slot.heading), py = std::cos(sc.slot.heading);
    for (int side = -1; side <= 1; side += 2) {
      if (!rng.bernoulli(0.75)) continue;
      ObstacleRect car;
      car.x = sc.slot.x + side * px * 2.8;
      car.y = sc.slot.y + side * py * 2.8;
      car.heading = sc.slot.heading;
      car.half_length = 2.1;
      car.half_width = 0.85;
      if (std::abs(car.x) > cfg.range_x - 0.3 || std::abs(car.y) > cfg.range_y - 0.3) continue;
      if (path_distance(expert, car) < cfg.planner.clearance) continue;
      if (car.distance(0.0, 0.0) < 1.0) continue;
      sc.obstacles.push_back(car);
    }
    // occasionally a far bystander vehicle
    if (rng.bernoulli(0.4)) {
      ObstacleRect other;
      other.x = rng.uniform(-lim_x, lim_x);
      other.y = rng.uniform(-lim_y, lim_y);
      other.heading = rng.uniform(-M_PI, M_PI);
      other.half_length = 2.1;
      other.half_width = 0.85;
      if (path_distance(expert, other) >= 1.0 && other.distance(0.0, 0.0) >= 1.5 &&
          other.distance(sc.slot.x, sc.slot.y) >= 2.0) {
        sc.obstacles.push_back(other);
      }
    }

    // lane corridor along the initial driving direction
    sc.lane_lines.push_back({-8.0, 2.2, 8.0, 2.2});
    sc.lane_lines.push_back({-8.0, -2.2, 8.0, -2.2});
    return sc;
  }
  throw std::runtime_error("sample_scenario: no feasible geometry after 64 attempts (seed " +
                           std::to_string(seed) + ")");
}

}  // namespace parknet
