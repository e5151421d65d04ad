#pragma once

#include <optional>
#include <string_view>

#include "speedplan/geometry.hpp"
#include "speedplan/simworld.hpp"

namespace speedplan {

enum class RewardKind { Plain, Coupled };

std::string_view to_string(RewardKind kind);
/// Accepts "plain" or "coupled"; throws InvalidArgument otherwise.
RewardKind reward_kind_from_string(std::string_view name);

inline constexpr double degrees_to_radians(double deg) { return deg * kPi / 180.0; }

struct RewardConfig {
  double expected_speed = 1.2;                        // m/s, peak of the speed term
  double angle_threshold = degrees_to_radians(30.0);  // radians
  double far_coefficient = 20.0;
  double near_coefficient = 10.0;
  double hit_penalty = -100.0;
  double neutral_reward = 10.0;       // coupled reward with nothing in range
  double reach_bonus = 100.0;
  double no_collision_reward = 10.0;  // plain reward per safe step

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// Collision / goal / safe-step reward. Throws ContradictoryOutcome when
/// both flags are set.
double plain_reward(bool collided, bool reached, const RewardConfig& cfg);

/// Speed-coupled reward. Far branch when the heading clears every in-range
/// obstacle by more than the threshold, near branch otherwise; the speed term
/// is a unit-width Gaussian centred on the expected speed. With no obstacle in
/// range the neutral reward applies.
double coupled_reward(bool collided, double speed, std::optional<double> deviation,
                      const RewardConfig& cfg);

/// Terminal goal bonus added on top of the coupled reward.
double reach_bonus(bool reached, const RewardConfig& cfg);

/// Full per-step reward for either scheme. The plain scheme already pays the
/// goal in its own case, so the bonus is not added twice.
double step_reward(RewardKind kind, const RewardInputs& inputs, const RewardConfig& cfg);

}  // namespace speedplan
