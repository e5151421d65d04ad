#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "speedplan/agent.hpp"
#include "speedplan/error.hpp"

using namespace speedplan;

namespace {

// Single linear layer whose output is the bias vector regardless of input.
MlpParams constant_net(std::vector<double> q, int inputs = 20) {
  const std::vector<int> sizes{inputs, static_cast<int>(q.size())};
  MlpParams p(sizes);
  for (std::size_t i = 0; i < q.size(); ++i) p.layers[0].bias[static_cast<Eigen::Index>(i)] = q[i];
  return p;
}

Observation obs_of(double fill, int n = 20) {
  return Observation{std::vector<double>(n, fill)};
}

Transition make_transition(double r, bool terminal, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Transition t;
  for (int i = 0; i < 20; ++i) {
    t.state.values.push_back(u(rng));
    t.next_state.values.push_back(u(rng));
  }
  t.action = Action{static_cast<int>(seed % kActionCount)};
  t.reward = r;
  t.terminal = terminal;
  return t;
}

AgentConfig small_config() {
  AgentConfig c;
  c.batch_size = 4;
  c.replay_capacity = 100;
  c.hidden_sizes = {8, 8};
  return c;
}

}  // namespace

TEST(SelectAction, GreedyPicksArgmax) {
  std::mt19937_64 rng(1);
  const MlpParams p = constant_net({0.1, 0.9, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(select_action(p, obs_of(0.5), 0.0, rng).index, 1);
}

TEST(SelectAction, TiesGoToLowestIndex) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(select_action(constant_net(std::vector<double>(9, 2.5)), obs_of(0.1), 0.0, rng).index, 0);
  Eigen::VectorXd v(4);
  v << 1.0, 3.0, 3.0, 2.0;
  EXPECT_EQ(argmax(v), 1);
}

TEST(SelectAction, UniformUnderFullExploration) {
  std::mt19937_64 rng(2024);
  const MlpParams p = constant_net({5, 0, 0, 0, 0, 0, 0, 0, 0});
  std::array<int, kActionCount> counts{};
  const int draws = 90000;
  for (int i = 0; i < draws; ++i) ++counts[select_action(p, obs_of(0.0), 1.0, rng).index];
  const double expected = draws / static_cast<double>(kActionCount);
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // Upper 0.001 quantile of chi-squared with 8 degrees of freedom.
  EXPECT_LT(chi2, 26.124);
}

TEST(SelectAction, RejectsBadEpsilon) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(select_action(constant_net(std::vector<double>(9, 0.0)), obs_of(0), 1.5, rng), Error);
}

TEST(Targets, TerminalReturnsReward) {
  const Transition t = make_transition(-100.0, true);
  const MlpParams net = constant_net({3.0, 0.5});
  EXPECT_EQ(dqn_target(t, net, 0.99), -100.0);
  EXPECT_EQ(ddqn_target(t, net, net, 0.99), -100.0);
}

TEST(Targets, DqnHandArithmetic) {
  const Transition t = make_transition(1.0, false);
  EXPECT_NEAR(dqn_target(t, constant_net({3.0, 0.5}), 0.9), 3.7, 1e-15);
}

TEST(Targets, DdqnHandArithmetic) {
  const Transition t = make_transition(1.0, false);
  const MlpParams online = constant_net({1.0, 2.0});
  const MlpParams target = constant_net({3.0, 0.5});
  EXPECT_NEAR(ddqn_target(t, online, target, 0.9), 1.45, 1e-15);
  EXPECT_NEAR(dqn_target(t, target, 0.9), 3.7, 1e-15);
}

TEST(Targets, ZeroDiscountIsReward) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Transition t = make_transition(7.25, false, s);
    const MlpParams a = init_params(s), b = init_params(s + 100);
    EXPECT_EQ(dqn_target(t, b, 0.0), 7.25);
    EXPECT_EQ(ddqn_target(t, a, b, 0.0), 7.25);
  }
}

TEST(Targets, DdqnNeverExceedsDqn) {
  const oracles::DdqnOrderingStats s = oracles::ddqn_ordering(300, 5);
  EXPECT_EQ(s.cases, 300);
  EXPECT_EQ(s.violations, 0);
  EXPECT_EQ(s.single_action_mismatch, 0);
  EXPECT_EQ(s.same_params_mismatch, 0);
}

TEST(Agent, SingleTransitionLossMatchesHandComputation) {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.9;
  cfg.algorithm = Algorithm::Dqn;
  Agent agent(cfg, 20, 3);
  const Transition t = make_transition(2.0, false, 4);
  const double q = forward(agent.online(), t.state.values)[t.action.index];
  const double y = 2.0 + 0.9 * forward(agent.target(), t.next_state.values).maxCoeff();
  const std::vector<const Transition*> batch{&t};
  EXPECT_NEAR(agent.batch_loss(batch, nullptr), (q - y) * (q - y), 1e-12);
}

TEST(Agent, ZeroTdErrorLeavesParamsUnchanged) {
  AgentConfig cfg = small_config();
  Agent agent(cfg, 20, 6);
  Transition t = make_transition(0.0, true, 2);
  t.reward = forward(agent.online(), t.state.values)[t.action.index];
  const MlpParams before = agent.online();
  const std::vector<const Transition*> batch{&t, &t};
  EXPECT_EQ(agent.train_on(batch), 0.0);
  EXPECT_TRUE(agent.online() == before);
}

TEST(Agent, BatchLossGradientMatchesFiniteDifferences) {
  AgentConfig cfg = small_config();
  Agent agent(cfg, 20, 8);
  agent.target_mutable() = init_params(99, cfg.layer_sizes(20));
  std::vector<Transition> ts;
  for (std::uint64_t s = 0; s < 5; ++s) ts.push_back(make_transition(s * 1.5 - 3, s == 2, s));
  std::vector<const Transition*> batch;
  for (const Transition& t : ts) batch.push_back(&t);

  Gradients g = Gradients::zeros_like(agent.online());
  agent.batch_loss(batch, &g);
  const double h = 1e-6;
  double worst = 0.0;
  MlpParams& p = agent.online_mutable();
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < p.layers[l].weights.size(); ++i) {
      double& w = p.layers[l].weights.data()[i];
      const double saved = w;
      w = saved + h;
      const double fp = agent.batch_loss(batch, nullptr);
      w = saved - h;
      const double fm = agent.batch_loss(batch, nullptr);
      w = saved;
      const double numeric = (fp - fm) / (2 * h);
      const double analytic = g.layers[l].weights.data()[i];
      worst = std::max(worst, std::abs(numeric - analytic) /
                                  std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Agent, TargetSyncAtInterval) {
  AgentConfig cfg = small_config();
  cfg.target_sync_interval = 3;
  cfg.learning_rate = 0.01;
  Agent agent(cfg, 20, 10);
  ReplayBuffer buf(100);
  for (std::uint64_t s = 0; s < 20; ++s) buf.push(make_transition(1.0, false, s));
  std::mt19937_64 rng(1);
  agent.train_step(buf, rng);
  agent.train_step(buf, rng);
  EXPECT_FALSE(agent.online() == agent.target());
  agent.train_step(buf, rng);
  EXPECT_EQ(agent.gradient_steps(), 3);
  EXPECT_TRUE(agent.online() == agent.target());
}

TEST(Agent, BufferTooSmall) {
  Agent agent(small_config(), 20, 1);
  ReplayBuffer buf(100);
  std::mt19937_64 rng(1);
  try {
    agent.train_step(buf, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BufferTooSmall);
  }
  for (std::uint64_t s = 0; s < 3; ++s) buf.push(make_transition(0, false, s));
  EXPECT_THROW(agent.train_step(buf, rng), Error);
  ReplayBuffer empty(10);
  EXPECT_THROW(empty.sample(1, rng), Error);
}

TEST(Agent, TrainingIsDeterministic) {
  auto run = [] {
    Agent agent(small_config(), 20, 12);
    ReplayBuffer buf(100);
    for (std::uint64_t s = 0; s < 40; ++s) buf.push(make_transition(s % 7 - 3.0, s % 5 == 0, s));
    std::mt19937_64 rng(77);
    std::vector<double> losses;
    for (int i = 0; i < 30; ++i) losses.push_back(agent.train_step(buf, rng));
    return std::make_pair(losses, agent.online());
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_TRUE(a.second == b.second);
}

TEST(Agent, ConfigValidation) {
  AgentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.5;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
  c = AgentConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(algorithm_from_string("dqn"), Algorithm::Dqn);
  EXPECT_THROW(algorithm_from_string("a3c"), Error);
}

TEST(Agent, EpsilonSchedule) {
  const AgentConfig c;
  EXPECT_EQ(c.epsilon_at(0), 1.0);
  EXPECT_NEAR(c.epsilon_at(10000), 0.525, 1e-15);
  EXPECT_EQ(c.epsilon_at(20000), 0.05);
  EXPECT_EQ(c.epsilon_at(1000000), 0.05);
}

TEST(ReplayBuffer, RingOverwritesOldest) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(make_transition(i, false, 0));
  EXPECT_EQ(buf.size(), 3u);
  std::vector<double> rewards;
  for (std::size_t i = 0; i < buf.size(); ++i) rewards.push_back(buf[i].reward);
  std::sort(rewards.begin(), rewards.end());
  EXPECT_EQ(rewards, (std::vector<double>{2, 3, 4}));
  std::mt19937_64 rng(3);
  for (const Transition* t : buf.sample(50, rng)) EXPECT_GE(t->reward, 2.0);
}
