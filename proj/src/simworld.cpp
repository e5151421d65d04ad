#include "speedplan/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "speedplan/error.hpp"

namespace speedplan {

namespace {

[[noreturn]] void invalid_world(const std::string& what) {
  throw Error(ErrorCode::InvalidWorld, "invalid world: " + what);
}

bool disc_inside(const WorldBounds& b, double x, double y, double r) {
  return x - r >= b.min_x && x + r <= b.max_x && y - r >= b.min_y &&
         y + r <= b.max_y;
}

}  // namespace

void SimParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(dt > 0.0, "dt must be positive");
  require(v_max > 0.0, "v_max must be positive");
  require(w_max > 0.0, "w_max must be positive");
  require(speed_delta > 0.0 && steer_delta > 0.0, "action deltas must be positive");
  require(vehicle_radius > 0.0, "vehicle_radius must be positive");
  require(n_rays >= 2, "n_rays must be at least 2");
  require(max_range > 0.0, "max_range must be positive");
  require(sensing_radius > 0.0, "sensing_radius must be positive");
  require(max_steps > 0, "max_steps must be positive");
}

void validate_world(const WorldConfig& world, const SimParams& params) {
  if (!(world.width > 0.0) || !(world.height > 0.0)) {
    invalid_world("width and height must be positive");
  }
  if (!(world.goal_tolerance > 0.0)) invalid_world("goal_tolerance must be positive");
  const WorldBounds bounds = world.bounds();
  for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
    const Obstacle& o = world.obstacles[i];
    if (!(o.radius > 0.0)) {
      invalid_world("obstacle " + std::to_string(i) + " has non-positive radius");
    }
    if (!disc_inside(bounds, o.center_x, o.center_y, o.radius)) {
      invalid_world("obstacle " + std::to_string(i) + " extends outside the world");
    }
  }
  if (!bounds.contains(world.goal)) invalid_world("goal lies outside the world");
  for (const Obstacle& o : world.obstacles) {
    if (distance(world.goal, {o.center_x, o.center_y}) <= o.radius) {
      invalid_world("goal lies inside an obstacle");
    }
  }
  if (!bounds.contains(world.start.position())) {
    invalid_world("start lies outside the world");
  }
  if (check_collision(world.start, params.vehicle_radius, world.obstacles, bounds)) {
    invalid_world("vehicle at start overlaps an obstacle or wall");
  }
}

std::string_view to_string(DoneReason reason) {
  switch (reason) {
    case DoneReason::Running: return "running";
    case DoneReason::Collision: return "collision";
    case DoneReason::Goal: return "goal";
    case DoneReason::Timeout: return "timeout";
  }
  return "unknown";
}

Simulation::Simulation(SimParams params) : params_(params) { params_.validate(); }

Observation Simulation::reset(const WorldConfig& world) {
  validate_world(world, params_);
  world_ = world;
  state_ = VehicleState{world.start, 0.0, 0.0};
  steps_ = 0;
  done_ = false;
  return observe();
}

void Simulation::set_state(const VehicleState& state) {
  state_.pose = Pose2D(state.pose.x, state.pose.y, state.pose.heading);
  state_.linear_speed = std::clamp(state.linear_speed, 0.0, params_.v_max);
  state_.angular_rate = std::clamp(state.angular_rate, -params_.w_max, params_.w_max);
}

Observation Simulation::observe() const {
  const int n = params_.n_rays;
  Observation obs;
  obs.values.resize(static_cast<std::size_t>(params_.observation_size()));
  const Pose2D& pose = state_.pose;
  const WorldBounds bounds = world_.bounds();
  const double spread = kPi / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) {
    const double bearing = pose.heading - kPi / 2.0 + spread * i;
    obs.values[i] = cast_ray(pose.position(), bearing, world_.obstacles, bounds,
                             params_.max_range) /
                    params_.max_range;
  }
  const double diagonal = std::hypot(world_.width, world_.height);
  const double gx = world_.goal.x - pose.x;
  const double gy = world_.goal.y - pose.y;
  obs.values[n] = std::min(std::hypot(gx, gy) / diagonal, 1.0);
  obs.values[n + 1] = wrap_angle(std::atan2(gy, gx) - pose.heading) / kPi;
  obs.values[n + 2] = state_.linear_speed / params_.v_max;
  obs.values[n + 3] = state_.angular_rate / params_.w_max;
  return obs;
}

StepOutcome Simulation::step(Action action, double dt) {
  if (done_) {
    throw Error(ErrorCode::SteppedAfterDone, "step called on a finished episode");
  }
  if (!action.valid()) {
    throw Error(ErrorCode::InvalidArgument,
                "action index " + std::to_string(action.index) + " out of range");
  }
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");

  VehicleState& s = state_;
  s.linear_speed = std::clamp(s.linear_speed + params_.speed_delta * action.speed_sign(),
                              0.0, params_.v_max);
  s.angular_rate = std::clamp(s.angular_rate + params_.steer_delta * action.steer_sign(),
                              -params_.w_max, params_.w_max);
  const double theta = s.pose.heading;
  s.pose = Pose2D(s.pose.x + s.linear_speed * std::cos(theta) * dt,
                  s.pose.y + s.linear_speed * std::sin(theta) * dt,
                  theta + s.angular_rate * dt);
  ++steps_;

  StepOutcome out;
  RewardInputs& ri = out.reward_inputs;
  ri.speed = s.linear_speed;
  ri.collided = check_collision(s.pose, params_.vehicle_radius, world_.obstacles,
                                world_.bounds());
  ri.reached = !ri.collided &&
               distance(s.pose.position(), world_.goal) <= world_.goal_tolerance;
  if (!ri.collided) {
    ri.deviation = min_deviation_in_range(s.pose, world_.obstacles,
                                          params_.sensing_radius);
  }

  if (ri.collided) {
    out.done_reason = DoneReason::Collision;
  } else if (ri.reached) {
    out.done_reason = DoneReason::Goal;
  } else if (steps_ >= params_.max_steps) {
    out.done_reason = DoneReason::Timeout;
  }
  out.done = out.done_reason != DoneReason::Running;
  done_ = out.done;
  out.observation = observe();
  return out;
}

WorldConfig generate_world(double width, double height, int n_obstacles,
                           std::uint64_t seed, const GeneratorParams& gen) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "world width and height must be positive");
  }
  if (n_obstacles < 0) {
    throw Error(ErrorCode::InvalidArgument, "n_obstacles must be non-negative");
  }
  if (width < 2.0 * gen.wall_margin || height < 2.0 * gen.wall_margin) {
    throw Error(ErrorCode::InvalidArgument, "world too small for start/goal margins");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  WorldConfig world;
  world.width = width;
  world.height = height;
  world.rng_seed = seed;
  world.goal_tolerance = gen.goal_tolerance;
  world.start = Pose2D(uniform(gen.wall_margin, width - gen.wall_margin),
                       gen.wall_margin, kPi / 2.0);
  world.goal = {uniform(gen.wall_margin, width - gen.wall_margin),
                height - gen.wall_margin};

  const Vec2 start = world.start.position();
  for (int k = 0; k < n_obstacles; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < gen.max_attempts && !placed; ++attempt) {
      const double r = uniform(gen.radius_min, gen.radius_max);
      if (2.0 * r > width || 2.0 * r > height) continue;
      const Obstacle cand{uniform(r, width - r), uniform(r, height - r), r};
      const Vec2 c{cand.center_x, cand.center_y};
      if (distance(c, start) - r < gen.start_goal_clearance) continue;
      if (distance(c, world.goal) - r < gen.start_goal_clearance) continue;
      const bool overlaps = std::any_of(
          world.obstacles.begin(), world.obstacles.end(), [&](const Obstacle& o) {
            return distance(c, {o.center_x, o.center_y}) <
                   r + o.radius + gen.obstacle_gap;
          });
      if (overlaps) continue;
      world.obstacles.push_back(cand);
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::PlacementFailed,
                  "could not place obstacle " + std::to_string(k + 1) + " of " +
                      std::to_string(n_obstacles) + " after " +
                      std::to_string(gen.max_attempts) + " attempts");
    }
  }
  return world;
}

WorldConfig corridor_world(double width, double goal_ahead) {
  WorldConfig world;
  world.width = width;
  world.height = goal_ahead + 2.0;
  world.start = Pose2D(width / 2.0, 1.0, kPi / 2.0);
  world.goal = {width / 2.0, 1.0 + goal_ahead};
  world.goal_tolerance = 0.5;
  return world;
}

}  // namespace speedplan
