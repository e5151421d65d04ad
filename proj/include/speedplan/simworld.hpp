#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "speedplan/geometry.hpp"

namespace speedplan {

struct SimParams {
  double dt = 0.1;
  double v_max = 2.0;
  double w_max = 1.0;
  double speed_delta = 0.2;
  double steer_delta = 0.3;
  double vehicle_radius = 0.2;
  int n_rays = 16;
  double max_range = 5.0;
  double sensing_radius = 5.0;
  int max_steps = 500;

  int observation_size() const { return n_rays + 4; }
  void validate() const;
};

struct VehicleState {
  Pose2D pose;
  double linear_speed = 0.0;  // [0, v_max]
  double angular_rate = 0.0;  // [-w_max, w_max]
};

struct WorldConfig {
  double width = 0.0;
  double height = 0.0;
  std::vector<Obstacle> obstacles;
  Vec2 goal;
  double goal_tolerance = 0.5;
  Pose2D start;
  std::uint64_t rng_seed = 0;

  WorldBounds bounds() const { return {0.0, 0.0, width, height}; }
};

/// Throws Error(InvalidWorld) naming the first violated invariant.
void validate_world(const WorldConfig& world, const SimParams& params);

/// Fixed-length feature vector fed to the Q-network. Layout:
///   [0, n_rays)   ray distances / max_range, in [0, 1]
///   n_rays        goal distance / world diagonal, in [0, 1]
///   n_rays + 1    goal bearing relative to heading / pi, in [-1, 1]
///   n_rays + 2    linear speed / v_max, in [0, 1]
///   n_rays + 3    angular rate / w_max, in [-1, 1]
struct Observation {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double goal_distance() const { return values[values.size() - 4]; }
  double goal_bearing() const { return values[values.size() - 3]; }
  double linear_speed() const { return values[values.size() - 2]; }
  double angular_rate() const { return values[values.size() - 1]; }

  friend bool operator==(const Observation&, const Observation&) = default;
};

inline constexpr int kActionCount = 9;

/// index = 3 * speed_choice + steer_choice, where each choice is
/// 0 = decrease, 1 = hold, 2 = increase. Index 4 holds both.
struct Action {
  int index = 4;

  static Action from_choices(int speed_choice, int steer_choice) {
    return Action{3 * speed_choice + steer_choice};
  }
  int speed_sign() const { return index / 3 - 1; }  // -1, 0, +1
  int steer_sign() const { return index % 3 - 1; }
  bool valid() const { return index >= 0 && index < kActionCount; }

  friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr Action kHold{4};

enum class DoneReason { Running, Collision, Goal, Timeout };

std::string_view to_string(DoneReason reason);

struct RewardInputs {
  bool collided = false;
  bool reached = false;
  double speed = 0.0;
  std::optional<double> deviation;
};

struct StepOutcome {
  Observation observation;
  RewardInputs reward_inputs;
  bool done = false;
  DoneReason done_reason = DoneReason::Running;
};

class Simulation {
 public:
  explicit Simulation(SimParams params = {});

  /// Places the vehicle at the start pose at rest. Throws InvalidWorld.
  Observation reset(const WorldConfig& world);

  StepOutcome step(Action action) { return step(action, params_.dt); }
  /// Throws SteppedAfterDone once the episode has finished (or before reset).
  StepOutcome step(Action action, double dt);

  Observation observe() const;

  const VehicleState& state() const { return state_; }
  /// Overrides the vehicle state; speed and rate are clamped, heading wrapped.
  void set_state(const VehicleState& state);

  const WorldConfig& world() const { return world_; }
  const SimParams& params() const { return params_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }

 private:
  SimParams params_;
  WorldConfig world_;
  VehicleState state_;
  int steps_ = 0;
  bool done_ = true;
};

struct GeneratorParams {
  double radius_min = 0.3;
  double radius_max = 0.8;
  double start_goal_clearance = 1.0;  // obstacle edge to start/goal point
  double obstacle_gap = 0.5;          // free space between obstacle edges
  double wall_margin = 1.0;           // start/goal distance from the walls
  double goal_tolerance = 0.5;
  int max_attempts = 10000;           // consecutive rejections per obstacle
};

/// Start sits near the bottom wall facing +y, goal near the top wall; both x
/// coordinates are random. Obstacles are rejection-sampled discs. Throws
/// PlacementFailed when an obstacle cannot be placed.
WorldConfig generate_world(double width, double height, int n_obstacles,
                           std::uint64_t seed, const GeneratorParams& gen = {});

/// Obstacle-free smoke-test world: the goal lies `goal_ahead` metres straight
/// ahead of the start.
WorldConfig corridor_world(double width = 4.0, double goal_ahead = 6.0);

}  // namespace speedplan
