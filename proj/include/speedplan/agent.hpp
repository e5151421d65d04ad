#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "speedplan/neuralnet.hpp"
#include "speedplan/simworld.hpp"

namespace speedplan {

struct Transition {
  Observation state;
  Action action;
  double reward = 0.0;
  Observation next_state;
  bool terminal = false;  // no bootstrap from next_state
};

/// Fixed-capacity ring of transitions with uniform sampling (with
/// replacement) over the current contents.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  void push(Transition t);
  /// Throws BufferTooSmall when empty.
  std::vector<const Transition*> sample(std::size_t count, std::mt19937_64& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

enum class Algorithm { Dqn, Ddqn };

std::string_view to_string(Algorithm algorithm);
/// Accepts "dqn" or "ddqn".
Algorithm algorithm_from_string(std::string_view name);

struct AgentConfig {
  Algorithm algorithm = Algorithm::Ddqn;
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double momentum = kMomentum;
  int batch_size = 64;
  int replay_capacity = 50000;
  int target_sync_interval = 1000;  // gradient steps
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 20000;  // env steps
  double max_grad_norm = 10.0;      // <= 0 disables clipping
  std::vector<int> hidden_sizes{64, 64};

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
  /// Linear decay from epsilon_start to epsilon_end, flat afterwards.
  double epsilon_at(std::int64_t env_step) const;
  std::vector<int> layer_sizes(int observation_size) const;
};

/// Index of the largest value; ties go to the lowest index.
int argmax(const Eigen::VectorXd& values);

/// Epsilon-greedy action over forward(params, observation).
Action select_action(const MlpParams& params, const Observation& observation,
                     double epsilon, std::mt19937_64& rng);

/// r if terminal, else r + gamma * max_a target(s')[a].
double dqn_target(const Transition& t, const MlpParams& target, double gamma);

/// r if terminal, else r + gamma * target(s')[argmax_a online(s')[a]].
double ddqn_target(const Transition& t, const MlpParams& online,
                   const MlpParams& target, double gamma);

/// Online/target network pair plus optimiser state and counters.
class Agent {
 public:
  Agent(const AgentConfig& config, int observation_size, std::uint64_t seed);
  /// Restores an agent from saved online parameters (target = online).
  Agent(const AgentConfig& config, MlpParams online);

  Action act(const Observation& observation, double epsilon, std::mt19937_64& rng) const {
    return select_action(online_, observation, epsilon, rng);
  }
  Action greedy(const Observation& observation) const;

  double target_for(const Transition& t) const;

  /// One gradient step on a uniformly sampled batch of squared TD errors.
  /// Returns the batch loss before the update. Throws BufferTooSmall.
  double train_step(const ReplayBuffer& buffer, std::mt19937_64& rng);

  /// Same update on an explicit batch (used by train_step and tests).
  double train_on(std::span<const Transition* const> batch);

  /// Mean squared TD error of a batch and its gradient w.r.t. the online
  /// parameters; targets are constants.
  double batch_loss(std::span<const Transition* const> batch, Gradients* grads) const;

  void sync_target() { target_ = online_; }

  const AgentConfig& config() const { return config_; }
  const MlpParams& online() const { return online_; }
  const MlpParams& target() const { return target_; }
  MlpParams& online_mutable() { return online_; }
  MlpParams& target_mutable() { return target_; }
  std::int64_t gradient_steps() const { return gradient_steps_; }
  std::int64_t env_steps() const { return env_steps_; }
  void count_env_step() { ++env_steps_; }
  void set_counters(std::int64_t env_steps, std::int64_t gradient_steps) {
    env_steps_ = env_steps;
    gradient_steps_ = gradient_steps;
  }

 private:
  AgentConfig config_;
  MlpParams online_;
  MlpParams target_;
  MomentumState optimizer_;
  std::int64_t gradient_steps_ = 0;
  std::int64_t env_steps_ = 0;
};

}  // namespace speedplan
