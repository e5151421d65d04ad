#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "speedplan/agent.hpp"
#include "speedplan/reward.hpp"
#include "speedplan/simworld.hpp"

namespace speedplan {

/// splitmix64 finaliser over (base, stream, index); used to derive every
/// independent seed of an experiment from one user seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

struct StepRecord {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  int action = 0;
  double reward = 0.0;
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;  // empty unless recording was requested
  DoneReason outcome = DoneReason::Running;
  int step_count = 0;
  double total_reward = 0.0;
  double average_speed = 0.0;      // mean of per-step linear speeds
  double path_length = 0.0;        // metres travelled
  double distance_over_time = 0.0;  // path_length / elapsed time
};

using Policy = std::function<Action(const Observation&)>;

struct EpisodeContext {
  SimParams sim;
  RewardKind reward_kind = RewardKind::Coupled;
  RewardConfig reward;
};

/// Rolls `policy` from reset to termination.
EpisodeRecord run_episode(const WorldConfig& world, const EpisodeContext& ctx,
                          const Policy& policy, bool record);

/// Epsilon-greedy rollout of the agent's online network; epsilon = 0 is the
/// greedy evaluation mode.
EpisodeRecord run_episode(const WorldConfig& world, const EpisodeContext& ctx,
                          const Agent& agent, double epsilon, std::mt19937_64& rng,
                          bool record);

using WorldGenerator = std::function<WorldConfig(std::uint64_t seed)>;

enum class EnvLayout { Random, Corridor };

struct EnvSpec {
  std::string name;
  double width = 10.0;
  double height = 15.0;
  int obstacles = 10;
  /// Seed base of the evaluation worlds; shared by every reward kind.
  std::uint64_t eval_seed = 1000;
  /// Corridor ignores `obstacles` and puts the goal height - 2 metres ahead.
  EnvLayout layout = EnvLayout::Random;

  WorldGenerator generator(const GeneratorParams& gen = {}) const;
};

struct EvalSummary {
  int episodes = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_speed = 0.0;               // mean of episode average speeds
  double mean_distance_over_time = 0.0;
  double mean_return = 0.0;
  std::vector<EpisodeRecord> records;
};

/// Greedy evaluation on worlds generator(derive_seed(seed_base, 0, i)).
EvalSummary evaluate(const WorldGenerator& generator, const EpisodeContext& ctx,
                     const Agent& agent, int episodes, std::uint64_t seed_base,
                     bool record);

struct TrainSettings {
  std::int64_t budget = 150000;  // env steps, warmup included
  std::int64_t warmup = 1000;    // random-policy steps before learning starts
  std::int64_t eval_interval = 10000;
  int eval_episodes = 20;
  /// When set, the returned agent is the evaluation checkpoint with the
  /// highest success rate (later checkpoints win ties); otherwise the final
  /// parameters.
  bool keep_best = true;
  /// When false, arriving at the goal ends the episode but the learner
  /// bootstraps across it into the next episode's first observation.
  bool goal_terminal = false;

  void validate() const;
};

struct CurvePoint {
  std::int64_t env_step = 0;
  std::int64_t gradient_steps = 0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
  double success_rate = 0.0;
  double mean_speed = 0.0;
  double collision_rate = 0.0;
};

struct TrainResult {
  Agent agent;
  std::vector<CurvePoint> curve;
  std::int64_t episodes = 0;
  std::int64_t selected_step = 0;  // env step of the returned parameters
};

/// Process-wide cooperative stop flag. train() checks it every step and
/// throws Interrupted once it is set; the flag stays set until cleared.
/// request_interrupt is async-signal-safe.
void request_interrupt();
void clear_interrupt();
bool interrupt_requested();

using ProgressCallback = std::function<void(const CurvePoint&)>;

TrainResult train(const WorldGenerator& generator, const EpisodeContext& ctx,
                  const AgentConfig& agent_config, const TrainSettings& settings,
                  std::uint64_t seed, const ProgressCallback& progress = {});

struct ExperimentCell {
  std::string environment;
  RewardKind reward_kind = RewardKind::Coupled;
  int n = 0;
  double mean_speed = 0.0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_distance_over_time = 0.0;
  std::vector<double> episode_speeds;  // one average speed per evaluation episode
  std::vector<std::string> outcomes;
  std::uint64_t training_seed = 0;
  std::string error;  // non-empty when the cell failed
};

struct ExperimentResult {
  std::vector<ExperimentCell> cells;
  bool complete = true;

  const ExperimentCell* find(std::string_view env, RewardKind kind) const;
};

struct CompareSettings {
  std::vector<EnvSpec> environments;
  std::vector<RewardKind> reward_kinds{RewardKind::Plain, RewardKind::Coupled};
  int n_eval = 20;
  int training_seeds = 1;  // independent training runs per cell
  std::uint64_t seed = 1;
  TrainSettings train;
  GeneratorParams generator;
  /// Worker threads for independent cells; each cell stays single-threaded.
  int threads = 1;
};

using CellCallback = std::function<void(const ExperimentCell&, const TrainResult&,
                                        const EvalSummary&)>;

/// Trains one agent per (environment, reward kind, training seed) and scores
/// it with n_eval greedy episodes. Failed cells are reported with `error`
/// set and the result flagged incomplete.
ExperimentResult compare_rewards(const EpisodeContext& base_ctx,
                                 const AgentConfig& agent_config,
                                 const CompareSettings& settings,
                                 const CellCallback& on_cell = {});

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Writes <stem>.csv (t,x,y,heading,speed,reward) and <stem>_plot.json
/// (speed-vs-time series and trajectory polyline). Throws Io with the path.
void export_episode(const EpisodeRecord& record, const WorldConfig& world,
                    const std::filesystem::path& stem);

/// Parses a trajectory CSV written by export_episode.
std::vector<StepRecord> read_trajectory_csv(const std::filesystem::path& path);

}  // namespace speedplan
