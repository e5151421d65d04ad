#include "speedplan/agent.hpp"

#include <cmath>
#include <string>

#include "speedplan/error.hpp"

namespace speedplan {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::InvalidArgument, "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (!std::isfinite(t.reward)) {
    throw Error(ErrorCode::InvalidArgument, "transition reward must be finite");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count,
                                                    std::mt19937_64& rng) const {
  if (items_.empty()) throw Error(ErrorCode::BufferTooSmall, "replay buffer is empty");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out(count);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

std::string_view to_string(Algorithm algorithm) {
  return algorithm == Algorithm::Dqn ? "dqn" : "ddqn";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "dqn") return Algorithm::Dqn;
  if (name == "ddqn") return Algorithm::Ddqn;
  throw Error(ErrorCode::InvalidArgument,
              "unknown algorithm '" + std::string(name) + "' (expected dqn or ddqn)");
}

void AgentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(batch_size > 0, "batch_size must be positive");
  require(replay_capacity >= batch_size, "replay_capacity must be at least batch_size");
  require(target_sync_interval > 0, "target_sync_interval must be positive");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "epsilon_start must lie in [0, 1]");
  require(epsilon_end >= 0.0 && epsilon_end <= epsilon_start,
          "epsilon_end must lie in [0, epsilon_start]");
  require(epsilon_decay_steps > 0, "epsilon_decay_steps must be positive");
  require(std::isfinite(max_grad_norm), "max_grad_norm must be finite");
  for (int h : hidden_sizes) require(h > 0, "hidden_sizes entries must be positive");
}

double AgentConfig::epsilon_at(std::int64_t env_step) const {
  if (env_step >= epsilon_decay_steps) return epsilon_end;
  const double frac = static_cast<double>(env_step) / epsilon_decay_steps;
  return epsilon_start + frac * (epsilon_end - epsilon_start);
}

std::vector<int> AgentConfig::layer_sizes(int observation_size) const {
  std::vector<int> sizes{observation_size};
  sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
  sizes.push_back(kActionCount);
  return sizes;
}

int argmax(const Eigen::VectorXd& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

Action select_action(const MlpParams& params, const Observation& observation,
                     double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1]");
  }
  // Draw order is fixed (coin first, then index) so runs replay exactly.
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, params.output_size() - 1);
      return Action{pick(rng)};
    }
  }
  return Action{argmax(forward(params, observation.values))};
}

double dqn_target(const Transition& t, const MlpParams& target, double gamma) {
  if (t.terminal) return t.reward;
  return t.reward + gamma * forward(target, t.next_state.values).maxCoeff();
}

double ddqn_target(const Transition& t, const MlpParams& online,
                   const MlpParams& target, double gamma) {
  if (t.terminal) return t.reward;
  const int best = argmax(forward(online, t.next_state.values));
  return t.reward + gamma * forward(target, t.next_state.values)(best);
}

Agent::Agent(const AgentConfig& config, int observation_size, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  const std::vector<int> sizes = config_.layer_sizes(observation_size);
  online_ = init_params(seed, sizes);
  target_ = online_;
}

Agent::Agent(const AgentConfig& config, MlpParams online)
    : config_(config), online_(std::move(online)) {
  config_.validate();
  if (online_.layers.empty() || online_.output_size() != kActionCount) {
    throw Error(ErrorCode::ShapeMismatch,
                "network must have " + std::to_string(kActionCount) + " outputs");
  }
  target_ = online_;
}

Action Agent::greedy(const Observation& observation) const {
  return Action{argmax(forward(online_, observation.values))};
}

double Agent::target_for(const Transition& t) const {
  return config_.algorithm == Algorithm::Dqn
             ? dqn_target(t, target_, config_.gamma)
             : ddqn_target(t, online_, target_, config_.gamma);
}

double Agent::batch_loss(std::span<const Transition* const> batch, Gradients* grads) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw Error(ErrorCode::BufferTooSmall, "empty batch");
  const auto dim = static_cast<Eigen::Index>(online_.input_size());
  Eigen::MatrixXd states(dim, n);
  Eigen::MatrixXd next_states(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[i];
    if (static_cast<Eigen::Index>(t.state.size()) != dim ||
        static_cast<Eigen::Index>(t.next_state.size()) != dim) {
      throw Error(ErrorCode::ShapeMismatch,
                  "transition observation size " + std::to_string(t.state.size()) +
                      " does not match network input " + std::to_string(dim));
    }
    states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.state.values.data(), dim);
    next_states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.next_state.values.data(), dim);
  }

  // Bootstrap values come from plain forward passes; nothing here is traced,
  // so no gradient reaches the target network or the selection argmax.
  const Eigen::MatrixXd next_target = forward_batch(target_, next_states);
  Eigen::MatrixXd next_online;
  if (config_.algorithm == Algorithm::Ddqn) next_online = forward_batch(online_, next_states);

  const ForwardTrace trace = trace_batch(online_, states);
  const Eigen::MatrixXd& q = trace.output();
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(q.rows(), n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[i];
    double y = t.reward;
    if (!t.terminal) {
      double bootstrap;
      if (config_.algorithm == Algorithm::Dqn) {
        bootstrap = next_target.col(i).maxCoeff();
      } else {
        bootstrap = next_target(argmax(next_online.col(i)), i);
      }
      y += config_.gamma * bootstrap;
    }
    const double err = q(t.action.index, i) - y;
    loss += err * err;
    upstream(t.action.index, i) = 2.0 * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (grads) *grads = backprop(online_, trace, upstream);
  return loss;
}

double Agent::train_on(std::span<const Transition* const> batch) {
  Gradients grads;
  const double loss = batch_loss(batch, &grads);
  if (config_.max_grad_norm > 0.0) {
    const double norm = grads.norm();
    if (norm > config_.max_grad_norm) grads.scale(config_.max_grad_norm / norm);
  }
  sgd_step(online_, grads, config_.learning_rate, optimizer_, config_.momentum);
  ++gradient_steps_;
  if (gradient_steps_ % config_.target_sync_interval == 0) sync_target();
  return loss;
}

double Agent::train_step(const ReplayBuffer& buffer, std::mt19937_64& rng) {
  const auto need = static_cast<std::size_t>(config_.batch_size);
  if (buffer.size() < need) {
    throw Error(ErrorCode::BufferTooSmall,
                "replay buffer holds " + std::to_string(buffer.size()) +
                    " transitions, batch needs " + std::to_string(need));
  }
  const std::vector<const Transition*> batch = buffer.sample(need, rng);
  return train_on(batch);
}

}  // namespace speedplan
