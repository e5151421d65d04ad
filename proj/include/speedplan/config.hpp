#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "speedplan/agent.hpp"
#include "speedplan/harness.hpp"
#include "speedplan/reward.hpp"
#include "speedplan/simworld.hpp"

namespace speedplan {

/// One reproducible experiment: everything the train, compare, eval and
/// export commands need. Loaded from a JSON file with four sections
/// (world, agent, reward, harness); every key is optional and defaults to the
/// values below, unknown keys are rejected.
struct ExperimentConfig {
  std::vector<EnvSpec> environments{
      {"10x15", 10.0, 15.0, 10, 1000, EnvLayout::Random},
      {"25x25", 25.0, 25.0, 16, 2000, EnvLayout::Random},
  };
  SimParams sim;
  GeneratorParams generator;
  AgentConfig agent;
  RewardConfig reward;
  RewardKind reward_kind = RewardKind::Coupled;
  std::vector<RewardKind> compare_kinds{RewardKind::Plain, RewardKind::Coupled};
  TrainSettings train;
  int n_eval = 20;
  int training_seeds = 1;
  int threads = 1;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  EpisodeContext episode_context() const { return {sim, reward_kind, reward}; }
  CompareSettings compare_settings() const;
};

/// Throws Error(Config) with a message naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Throws Error(Config) naming the path when the file is missing or malformed.
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const ExperimentConfig& config);

nlohmann::json world_to_json(const WorldConfig& world);
/// Expects exactly the fields written by world_to_json.
WorldConfig world_from_json(const nlohmann::json& j);

nlohmann::json results_to_json(const ExperimentResult& result, const ExperimentConfig& config);
nlohmann::json curve_to_json(const std::vector<CurvePoint>& curve);

/// Writes <stem>.bin (network, see serialize_params) and <stem>.json (counters
/// and the experiment configuration).
void save_checkpoint(const Agent& agent, const ExperimentConfig& config,
                     const std::filesystem::path& stem, std::int64_t selected_step);

struct LoadedCheckpoint {
  MlpParams params;
  nlohmann::json sidecar;  // null when no sidecar exists
};

/// Accepts either the .bin path or the stem.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `doc` with two-space indentation and a trailing newline.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace speedplan
