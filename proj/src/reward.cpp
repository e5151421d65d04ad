#include "speedplan/reward.hpp"

#include <cmath>
#include <string>

#include "speedplan/error.hpp"

namespace speedplan {

std::string_view to_string(RewardKind kind) {
  return kind == RewardKind::Plain ? "plain" : "coupled";
}

RewardKind reward_kind_from_string(std::string_view name) {
  if (name == "plain") return RewardKind::Plain;
  if (name == "coupled") return RewardKind::Coupled;
  throw Error(ErrorCode::InvalidArgument,
              "unknown reward kind '" + std::string(name) + "' (expected plain or coupled)");
}

void RewardConfig::validate() const {
  if (!(expected_speed > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "expected_speed must be positive");
  }
  if (!(angle_threshold > 0.0 && angle_threshold < kPi)) {
    throw Error(ErrorCode::InvalidArgument, "angle_threshold must lie in (0, 180) degrees");
  }
  for (double c : {far_coefficient, near_coefficient, hit_penalty, neutral_reward,
                   reach_bonus, no_collision_reward}) {
    if (!std::isfinite(c)) {
      throw Error(ErrorCode::InvalidArgument, "reward coefficients must be finite");
    }
  }
}

double plain_reward(bool collided, bool reached, const RewardConfig& cfg) {
  if (collided && reached) {
    throw Error(ErrorCode::ContradictoryOutcome,
                "a step cannot both collide and reach the goal");
  }
  if (collided) return cfg.hit_penalty;
  if (reached) return cfg.reach_bonus;
  return cfg.no_collision_reward;
}

double coupled_reward(bool collided, double speed, std::optional<double> deviation,
                      const RewardConfig& cfg) {
  if (!(speed >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "speed must be non-negative");
  }
  if (collided) return cfg.hit_penalty;
  if (!deviation) return cfg.neutral_reward;
  const double dv = speed - cfg.expected_speed;
  const double gaussian = 1.0 + std::exp(-(dv * dv) / 2.0);
  if (*deviation > cfg.angle_threshold) return cfg.far_coefficient * gaussian;
  return cfg.near_coefficient * gaussian;
}

double reach_bonus(bool reached, const RewardConfig& cfg) {
  return reached ? cfg.reach_bonus : 0.0;
}

double step_reward(RewardKind kind, const RewardInputs& inputs, const RewardConfig& cfg) {
  if (kind == RewardKind::Plain) {
    return plain_reward(inputs.collided, inputs.reached, cfg);
  }
  if (inputs.collided && inputs.reached) {
    throw Error(ErrorCode::ContradictoryOutcome,
                "a step cannot both collide and reach the goal");
  }
  return coupled_reward(inputs.collided, inputs.speed, inputs.deviation, cfg) +
         reach_bonus(inputs.reached, cfg);
}

}  // namespace speedplan
