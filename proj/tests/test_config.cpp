#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "speedplan/config.hpp"
#include "speedplan/error.hpp"

using namespace speedplan;
using nlohmann::json;

namespace {

// Message of the Config error raised by parsing `doc`; empty when it parses.
std::string config_failure(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
    return e.what();
  }
  return {};
}

bool mentions(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const ExperimentConfig c = parse_config(json::object());
  EXPECT_EQ(c.environments.size(), 2u);
  EXPECT_EQ(c.environments[0].name, "10x15");
  EXPECT_EQ(c.n_eval, 20);
  EXPECT_EQ(c.agent.algorithm, Algorithm::Ddqn);
  EXPECT_EQ(c.reward.expected_speed, 1.2);
  EXPECT_EQ(c.agent.gamma, 0.99);
  EXPECT_EQ(c.agent.batch_size, 64);
  EXPECT_EQ(c.agent.target_sync_interval, 1000);
  EXPECT_EQ(c.agent.epsilon_decay_steps, 20000);
}

TEST(Config, GammaOutOfRangeNamesGamma) {
  const std::string msg = config_failure({{"agent", {{"gamma", 1.5}}}});
  EXPECT_TRUE(mentions(msg, "gamma")) << msg;
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_TRUE(mentions(config_failure({{"agnet", json::object()}}), "agnet"));
  EXPECT_TRUE(mentions(config_failure({{"agent", {{"gama", 0.9}}}}), "gama"));
  EXPECT_TRUE(mentions(config_failure({{"world", {{"environments", {{{"name", "a"}, {"size", 3}}}}}}}), "size"));
}

TEST(Config, WrongTypesRejected) {
  EXPECT_TRUE(mentions(config_failure({{"agent", {{"batch_size", "big"}}}}), "batch_size"));
  EXPECT_TRUE(mentions(config_failure({{"agent", {{"batch_size", 1.5}}}}), "batch_size"));
  EXPECT_TRUE(mentions(config_failure({{"harness", {{"keep_best", 1}}}}), "keep_best"));
  EXPECT_FALSE(config_failure({{"harness", "oops"}}).empty());
}

TEST(Config, SemanticValidation) {
  EXPECT_TRUE(mentions(config_failure({{"harness", {{"n_eval", 0}}}}), "n_eval"));
  EXPECT_TRUE(mentions(config_failure({{"reward", {{"kind", "shaped"}}}}), "shaped"));
  EXPECT_TRUE(mentions(config_failure({{"agent", {{"algorithm", "sarsa"}}}}), "sarsa"));
  EXPECT_TRUE(mentions(config_failure({{"reward", {{"expected_speed", -1.0}}}}), "expected_speed"));
}

TEST(Config, OverridesApply) {
  const ExperimentConfig c = parse_config({
      {"agent", {{"algorithm", "dqn"}, {"hidden_sizes", {32}}}},
      {"reward", {{"expected_speed", 0.9}, {"angle_threshold_deg", 45.0}}},
      {"harness", {{"seed", 77}, {"n_eval", 3}, {"reward_kinds", {"coupled"}}}},
  });
  EXPECT_EQ(c.agent.algorithm, Algorithm::Dqn);
  EXPECT_EQ(c.agent.hidden_sizes, std::vector<int>{32});
  EXPECT_EQ(c.reward.expected_speed, 0.9);
  EXPECT_NEAR(c.reward.angle_threshold, kPi / 4, 1e-15);
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.n_eval, 3);
  ASSERT_EQ(c.compare_kinds.size(), 1u);
  EXPECT_EQ(c.compare_kinds[0], RewardKind::Coupled);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.seed = 123;
  c.agent.learning_rate = 3e-4;
  c.environments.push_back({"corr", 4, 8, 0, 7, EnvLayout::Corridor});
  const json once = config_to_json(c);
  const json twice = config_to_json(parse_config(once));
  EXPECT_EQ(once, twice);
  const ExperimentConfig back = parse_config(once);
  EXPECT_EQ(back.environments.size(), 3u);
  EXPECT_EQ(back.environments[2].layout, EnvLayout::Corridor);
  EXPECT_EQ(back.agent.learning_rate, 3e-4);
}

TEST(Config, LoadErrorsNameThePath) {
  try {
    load_config("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
    EXPECT_TRUE(mentions(e.what(), "/nonexistent/config.json"));
  }
  const auto path = std::filesystem::temp_directory_path() / "speedplan_bad_config.json";
  std::ofstream(path) << "{ not json";
  try {
    load_config(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(mentions(e.what(), path.string()));
  }
  std::filesystem::remove(path);
}

TEST(WorldJson, RoundTripAndStrictness) {
  const WorldConfig w = generate_world(10, 15, 6, 21);
  const json j = world_to_json(w);
  const WorldConfig back = world_from_json(j);
  ASSERT_EQ(back.obstacles.size(), w.obstacles.size());
  for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
    EXPECT_EQ(back.obstacles[i].center_x, w.obstacles[i].center_x);
    EXPECT_EQ(back.obstacles[i].radius, w.obstacles[i].radius);
  }
  EXPECT_EQ(back.start.heading, w.start.heading);
  EXPECT_EQ(back.goal.y, w.goal.y);
  EXPECT_EQ(back.rng_seed, w.rng_seed);

  json extra = j;
  extra["colour"] = "red";
  EXPECT_THROW(world_from_json(extra), Error);
  json missing = j;
  missing.erase("goal");
  EXPECT_THROW(world_from_json(missing), Error);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "speedplan_ckpt_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ExperimentConfig cfg;
  Agent agent(cfg.agent, cfg.sim.observation_size(), 4);
  agent.set_counters(1234, 56);
  save_checkpoint(agent, cfg, dir / "ck", 1000);
  for (const auto& p : {dir / "ck", dir / "ck.bin", dir / "ck.json"}) {
    const LoadedCheckpoint l = load_checkpoint(p);
    EXPECT_TRUE(l.params == agent.online());
    EXPECT_EQ(l.sidecar.at("env_steps"), 1234);
    EXPECT_EQ(l.sidecar.at("selected_step"), 1000);
  }
  std::filesystem::remove(dir / "ck.json");
  EXPECT_TRUE(load_checkpoint(dir / "ck").sidecar.is_null());
  try {
    load_checkpoint(dir / "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(mentions(e.what(), "missing"));
  }
  std::filesystem::remove_all(dir);
}
