#include "speedplan/speedplan.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "speedplan/config.hpp"
#include "speedplan/error.hpp"

using namespace speedplan;
namespace fs = std::filesystem;

struct sp_experiment {
  ExperimentConfig config;
};

struct sp_agent {
  Agent agent;
  std::vector<CurvePoint> curve;
  std::int64_t selected_step = 0;
  bool trained = false;
};

struct sp_eval {
  EvalSummary summary;
  std::vector<WorldConfig> worlds;
};

struct sp_results {
  ExperimentConfig config;
  ExperimentResult result;
  // Evaluation episodes and their worlds, parallel to result.cells.
  std::vector<std::vector<EpisodeRecord>> records;
  std::vector<std::vector<WorldConfig>> worlds;
};

struct sp_world {
  EpisodeContext ctx;
  WorldConfig world;
  Simulation sim;
};

namespace {

thread_local std::string g_last_error;

sp_status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::VehicleInsideObstacle: return SP_ERR_VEHICLE_INSIDE_OBSTACLE;
    case ErrorCode::InvalidWorld: return SP_ERR_INVALID_WORLD;
    case ErrorCode::SteppedAfterDone: return SP_ERR_STEPPED_AFTER_DONE;
    case ErrorCode::PlacementFailed: return SP_ERR_PLACEMENT_FAILED;
    case ErrorCode::ContradictoryOutcome: return SP_ERR_CONTRADICTORY_OUTCOME;
    case ErrorCode::ShapeMismatch: return SP_ERR_SHAPE_MISMATCH;
    case ErrorCode::BufferTooSmall: return SP_ERR_BUFFER_TOO_SMALL;
    case ErrorCode::InvalidArgument: return SP_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return SP_ERR_CONFIG;
    case ErrorCode::Io: return SP_ERR_IO;
    case ErrorCode::Interrupted: return SP_ERR_INTERRUPTED;
  }
  return SP_ERR_INTERNAL;
}

sp_status fail(sp_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
sp_status guarded(F&& body) {
  try {
    body();
    return SP_OK;
  } catch (const Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SP_ERR_INTERNAL, e.what());
  }
}

void require(bool condition, const char* message) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, message);
}

const EnvSpec& find_environment(const ExperimentConfig& config, const char* name) {
  if (config.environments.empty()) throw Error(ErrorCode::Config, "no environments configured");
  if (name == nullptr) return config.environments.front();
  std::string known;
  for (const EnvSpec& e : config.environments) {
    if (e.name == name) return e;
    known += (known.empty() ? "" : ", ") + e.name;
  }
  throw Error(ErrorCode::InvalidArgument,
              std::string("unknown environment '") + name + "' (configured: " + known + ")");
}

void check_agent_shape(const ExperimentConfig& config, const MlpParams& params) {
  const int expected = config.sim.observation_size();
  if (params.input_size() != expected) {
    throw Error(ErrorCode::ShapeMismatch,
                "observation size mismatch: checkpoint expects " +
                    std::to_string(params.input_size()) + ", config produces " +
                    std::to_string(expected));
  }
  if (params.output_size() != kActionCount) {
    throw Error(ErrorCode::ShapeMismatch,
                "action count mismatch: checkpoint has " + std::to_string(params.output_size()) +
                    ", simulator has " + std::to_string(kActionCount));
  }
}

Observation to_observation(const sp_agent* agent, const double* values, std::size_t size) {
  require(values != nullptr, "observation must not be null");
  const auto expected = static_cast<std::size_t>(agent->agent.online().input_size());
  if (size != expected) {
    throw Error(ErrorCode::ShapeMismatch, "observation has " + std::to_string(size) +
                                              " values, agent expects " + std::to_string(expected));
  }
  return Observation{std::vector<double>(values, values + size)};
}

void copy_observation(const Observation& obs, double* out, std::size_t capacity) {
  if (out == nullptr) return;
  if (capacity < obs.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "observation buffer holds " + std::to_string(capacity) + " values, need " +
                    std::to_string(obs.size()));
  }
  std::copy(obs.values.begin(), obs.values.end(), out);
}

sp_done_reason to_c(DoneReason r) {
  switch (r) {
    case DoneReason::Running: return SP_RUNNING;
    case DoneReason::Collision: return SP_DONE_COLLISION;
    case DoneReason::Goal: return SP_DONE_GOAL;
    case DoneReason::Timeout: return SP_DONE_TIMEOUT;
  }
  return SP_RUNNING;
}

sp_reward_kind to_c(RewardKind k) {
  return k == RewardKind::Plain ? SP_REWARD_PLAIN : SP_REWARD_COUPLED;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::Io, path.string() + ": write failed");
}

std::string episode_name(const std::string& prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_%03zu", i);
  return prefix + buf;
}

void export_episodes(const std::vector<EpisodeRecord>& records,
                     const std::vector<WorldConfig>& worlds, const fs::path& dir,
                     const std::string& prefix) {
  ensure_dir(dir);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const fs::path stem = dir / episode_name(prefix, i);
    export_episode(records[i], worlds[i], stem);
    write_json_file(world_to_json(worlds[i]), stem.string() + "_world.json");
  }
}

}  // namespace

extern "C" {

const char* sp_version(void) { return "0.1.0"; }

const char* sp_status_name(sp_status status) {
  switch (status) {
    case SP_OK: return "ok";
    case SP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SP_ERR_CONFIG: return "configuration error";
    case SP_ERR_IO: return "i/o error";
    case SP_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case SP_ERR_INVALID_WORLD: return "invalid world";
    case SP_ERR_VEHICLE_INSIDE_OBSTACLE: return "vehicle inside obstacle";
    case SP_ERR_STEPPED_AFTER_DONE: return "stepped after done";
    case SP_ERR_PLACEMENT_FAILED: return "placement failed";
    case SP_ERR_CONTRADICTORY_OUTCOME: return "contradictory outcome";
    case SP_ERR_BUFFER_TOO_SMALL: return "replay buffer too small";
    case SP_ERR_INTERRUPTED: return "interrupted";
    case SP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sp_last_error(void) { return g_last_error.c_str(); }

void sp_request_interrupt(void) { request_interrupt(); }
void sp_clear_interrupt(void) { clear_interrupt(); }

sp_status sp_experiment_create_default(sp_experiment** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    *out = new sp_experiment{};
  });
}

sp_status sp_experiment_load(const char* path, sp_experiment** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    auto e = std::make_unique<sp_experiment>();
    e->config = load_config(path);
    *out = e.release();
  });
}

sp_status sp_experiment_parse(const char* json_text, sp_experiment** out) {
  return guarded([&] {
    require(json_text != nullptr && out != nullptr, "json_text and out must not be null");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Config, std::string("config error: malformed JSON: ") + e.what());
    }
    auto e = std::make_unique<sp_experiment>();
    e->config = parse_config(doc);
    *out = e.release();
  });
}

void sp_experiment_free(sp_experiment* experiment) { delete experiment; }

sp_status sp_experiment_set_seed(sp_experiment* experiment, uint64_t seed) {
  return guarded([&] {
    require(experiment != nullptr, "experiment must not be null");
    experiment->config.seed = seed;
  });
}

sp_status sp_experiment_set_algorithm(sp_experiment* experiment, const char* name) {
  return guarded([&] {
    require(experiment != nullptr && name != nullptr, "experiment and name must not be null");
    experiment->config.agent.algorithm = algorithm_from_string(name);
  });
}

sp_status sp_experiment_set_output_dir(sp_experiment* experiment, const char* dir) {
  return guarded([&] {
    require(experiment != nullptr && dir != nullptr, "experiment and dir must not be null");
    require(*dir != '\0', "output dir must not be empty");
    experiment->config.output_dir = dir;
  });
}

const char* sp_experiment_output_dir(const sp_experiment* experiment) {
  return experiment ? experiment->config.output_dir.c_str() : "";
}

int sp_experiment_n_eval(const sp_experiment* experiment) {
  return experiment ? experiment->config.n_eval : 0;
}

size_t sp_experiment_observation_size(const sp_experiment* experiment) {
  return experiment ? static_cast<size_t>(experiment->config.sim.observation_size()) : 0;
}

size_t sp_experiment_environment_count(const sp_experiment* experiment) {
  return experiment ? experiment->config.environments.size() : 0;
}

const char* sp_experiment_environment_name(const sp_experiment* experiment, size_t index) {
  if (!experiment || index >= experiment->config.environments.size()) return nullptr;
  return experiment->config.environments[index].name.c_str();
}

sp_status sp_experiment_save(const sp_experiment* experiment, const char* path) {
  return guarded([&] {
    require(experiment != nullptr && path != nullptr, "experiment and path must not be null");
    write_json_file(config_to_json(experiment->config), path);
  });
}

sp_status sp_train(const sp_experiment* experiment, const char* environment, sp_log_fn log,
                   void* user, sp_agent** out) {
  return guarded([&] {
    require(experiment != nullptr && out != nullptr, "experiment and out must not be null");
    const ExperimentConfig& cfg = experiment->config;
    const EnvSpec& env = find_environment(cfg, environment);
    ProgressCallback progress;
    if (log) {
      progress = [&](const CurvePoint& p) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "step %lld  epsilon %.3f  loss %.3f  success %.2f  speed %.3f  collisions %.2f",
                      static_cast<long long>(p.env_step), p.epsilon, p.mean_loss, p.success_rate,
                      p.mean_speed, p.collision_rate);
        log(line, user);
      };
    }
    TrainResult r = train(env.generator(cfg.generator), cfg.episode_context(), cfg.agent,
                          cfg.train, derive_seed(cfg.seed, 100), progress);
    *out = new sp_agent{std::move(r.agent), std::move(r.curve), r.selected_step, true};
  });
}

sp_status sp_agent_save(const sp_agent* agent, const sp_experiment* experiment, const char* stem) {
  return guarded([&] {
    require(agent && experiment && stem, "agent, experiment and stem must not be null");
    const fs::path p(stem);
    if (p.has_parent_path()) ensure_dir(p.parent_path());
    save_checkpoint(agent->agent, experiment->config, p, agent->selected_step);
    if (agent->trained) write_json_file(curve_to_json(agent->curve), p.string() + "_curve.json");
  });
}

sp_status sp_agent_load(const char* path, sp_agent** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    LoadedCheckpoint ck = load_checkpoint(path);
    AgentConfig ac;
    std::int64_t env_steps = 0, grad_steps = 0, selected = 0;
    if (ck.sidecar.is_object()) {
      if (ck.sidecar.contains("config")) ac = parse_config(ck.sidecar["config"]).agent;
      env_steps = ck.sidecar.value("env_steps", std::int64_t{0});
      grad_steps = ck.sidecar.value("gradient_steps", std::int64_t{0});
      selected = ck.sidecar.value("selected_step", std::int64_t{0});
    }
    Agent agent(ac, std::move(ck.params));
    agent.set_counters(env_steps, grad_steps);
    *out = new sp_agent{std::move(agent), {}, selected, false};
  });
}

void sp_agent_free(sp_agent* agent) { delete agent; }

size_t sp_agent_input_size(const sp_agent* agent) {
  return agent ? static_cast<size_t>(agent->agent.online().input_size()) : 0;
}

size_t sp_agent_output_size(const sp_agent* agent) {
  return agent ? static_cast<size_t>(agent->agent.online().output_size()) : 0;
}

sp_status sp_agent_q_values(const sp_agent* agent, const double* observation,
                            size_t observation_size, double* q_out, size_t q_capacity) {
  return guarded([&] {
    require(agent != nullptr && q_out != nullptr, "agent and q_out must not be null");
    const Observation obs = to_observation(agent, observation, observation_size);
    const Eigen::VectorXd q = forward(agent->agent.online(), obs.values);
    require(q_capacity >= static_cast<size_t>(q.size()), "q buffer too small");
    std::copy(q.data(), q.data() + q.size(), q_out);
  });
}

sp_status sp_agent_greedy_action(const sp_agent* agent, const double* observation,
                                 size_t observation_size, int* action_out) {
  return guarded([&] {
    require(agent != nullptr && action_out != nullptr, "agent and action_out must not be null");
    *action_out = agent->agent.greedy(to_observation(agent, observation, observation_size)).index;
  });
}

sp_status sp_evaluate(const sp_experiment* experiment, const sp_agent* agent,
                      const char* environment, int episodes, sp_eval** out) {
  return guarded([&] {
    require(experiment && agent && out, "experiment, agent and out must not be null");
    require(episodes >= 1, "episode count must be at least 1");
    const ExperimentConfig& cfg = experiment->config;
    check_agent_shape(cfg, agent->agent.online());
    const EnvSpec& env = find_environment(cfg, environment);
    const WorldGenerator gen = env.generator(cfg.generator);
    auto e = std::make_unique<sp_eval>();
    e->summary = evaluate(gen, cfg.episode_context(), agent->agent, episodes, env.eval_seed, true);
    for (int i = 0; i < episodes; ++i) {
      e->worlds.push_back(gen(derive_seed(env.eval_seed, 0, static_cast<std::uint64_t>(i))));
    }
    *out = e.release();
  });
}

void sp_eval_free(sp_eval* eval) { delete eval; }

sp_eval_summary sp_eval_get_summary(const sp_eval* eval) {
  sp_eval_summary s{};
  if (!eval) return s;
  s.episodes = eval->summary.episodes;
  s.success_rate = eval->summary.success_rate;
  s.collision_rate = eval->summary.collision_rate;
  s.timeout_rate = eval->summary.timeout_rate;
  s.mean_speed = eval->summary.mean_speed;
  s.mean_distance_over_time = eval->summary.mean_distance_over_time;
  return s;
}

double sp_eval_episode_speed(const sp_eval* eval, size_t episode) {
  if (!eval || episode >= eval->summary.records.size()) return 0.0;
  return eval->summary.records[episode].average_speed;
}

sp_done_reason sp_eval_episode_outcome(const sp_eval* eval, size_t episode) {
  if (!eval || episode >= eval->summary.records.size()) return SP_RUNNING;
  return to_c(eval->summary.records[episode].outcome);
}

sp_status sp_eval_export(const sp_eval* eval, const char* dir, const char* prefix) {
  return guarded([&] {
    require(eval && dir && prefix, "eval, dir and prefix must not be null");
    export_episodes(eval->summary.records, eval->worlds, dir, prefix);
  });
}

sp_status sp_compare(const sp_experiment* experiment, sp_cell_fn on_cell, void* user,
                     sp_results** out) {
  return guarded([&] {
    require(experiment != nullptr && out != nullptr, "experiment and out must not be null");
    const ExperimentConfig& cfg = experiment->config;
    auto res = std::make_unique<sp_results>();
    res->config = cfg;
    std::map<std::pair<std::string, RewardKind>, std::vector<EpisodeRecord>> records;
    CellCallback collect = [&](const ExperimentCell& cell, const TrainResult&,
                               const EvalSummary& ev) {
      auto& dst = records[{cell.environment, cell.reward_kind}];
      dst.insert(dst.end(), ev.records.begin(), ev.records.end());
      if (on_cell) {
        sp_cell c{};
        c.environment = cell.environment.c_str();
        c.reward_kind = to_c(cell.reward_kind);
        c.n = ev.episodes;
        c.mean_speed = ev.mean_speed;
        c.success_rate = ev.success_rate;
        c.collision_rate = ev.collision_rate;
        c.timeout_rate = ev.timeout_rate;
        c.mean_distance_over_time = ev.mean_distance_over_time;
        c.training_seed = cell.training_seed;
        on_cell(&c, user);
      }
    };
    res->result = compare_rewards(cfg.episode_context(), cfg.agent, cfg.compare_settings(), collect);
    for (const ExperimentCell& cell : res->result.cells) {
      std::vector<EpisodeRecord> recs = std::move(records[{cell.environment, cell.reward_kind}]);
      std::vector<WorldConfig> worlds;
      if (!recs.empty()) {
        const EnvSpec& env = find_environment(cfg, cell.environment.c_str());
        const WorldGenerator gen = env.generator(cfg.generator);
        for (std::size_t i = 0; i < recs.size(); ++i) {
          const auto idx = static_cast<std::uint64_t>(i % static_cast<std::size_t>(cfg.n_eval));
          worlds.push_back(gen(derive_seed(env.eval_seed, 0, idx)));
        }
      }
      res->records.push_back(std::move(recs));
      res->worlds.push_back(std::move(worlds));
    }
    *out = res.release();
  });
}

void sp_results_free(sp_results* results) { delete results; }

int sp_results_complete(const sp_results* results) {
  return results && results->result.complete ? 1 : 0;
}

size_t sp_results_cell_count(const sp_results* results) {
  return results ? results->result.cells.size() : 0;
}

sp_status sp_results_cell(const sp_results* results, size_t index, sp_cell* out) {
  return guarded([&] {
    require(results != nullptr && out != nullptr, "results and out must not be null");
    require(index < results->result.cells.size(), "cell index out of range");
    const ExperimentCell& c = results->result.cells[index];
    out->environment = c.environment.c_str();
    out->reward_kind = to_c(c.reward_kind);
    out->n = c.n;
    out->mean_speed = c.mean_speed;
    out->success_rate = c.success_rate;
    out->collision_rate = c.collision_rate;
    out->timeout_rate = c.timeout_rate;
    out->mean_distance_over_time = c.mean_distance_over_time;
    out->training_seed = c.training_seed;
    out->error = c.error.empty() ? nullptr : c.error.c_str();
  });
}

sp_status sp_results_write(const sp_results* results, const sp_experiment* experiment,
                           const char* dir) {
  return guarded([&] {
    require(results && experiment && dir, "results, experiment and dir must not be null");
    const fs::path root(dir);
    ensure_dir(root);
    write_json_file(results_to_json(results->result, experiment->config), root / "results.json");

    std::string table =
        "environment,reward_kind,n,mean_speed,success_rate,collision_rate,timeout_rate,"
        "mean_distance_over_time,training_seed,error\n";
    std::string episodes =
        "environment,reward_kind,episode,outcome,average_speed,distance_over_time,steps,"
        "total_reward\n";
    for (std::size_t i = 0; i < results->result.cells.size(); ++i) {
      const ExperimentCell& c = results->result.cells[i];
      const std::string kind(to_string(c.reward_kind));
      table += c.environment + "," + kind + "," + std::to_string(c.n) + "," +
               format_double(c.mean_speed) + "," + format_double(c.success_rate) + "," +
               format_double(c.collision_rate) + "," + format_double(c.timeout_rate) + "," +
               format_double(c.mean_distance_over_time) + "," + std::to_string(c.training_seed) +
               "," + (c.error.empty() ? "" : "\"" + c.error + "\"") + "\n";
      const auto& recs = results->records[i];
      for (std::size_t e = 0; e < recs.size(); ++e) {
        const EpisodeRecord& r = recs[e];
        episodes += c.environment + "," + kind + "," + std::to_string(e) + "," +
                    std::string(to_string(r.outcome)) + "," + format_double(r.average_speed) +
                    "," + format_double(r.distance_over_time) + "," +
                    std::to_string(r.step_count) + "," + format_double(r.total_reward) + "\n";
      }
      if (!recs.empty()) {
        export_episodes(recs, results->worlds[i], root / "trajectories", c.environment + "_" + kind);
      }
    }
    write_text(root / "results.csv", table);
    write_text(root / "episodes.csv", episodes);
  });
}

sp_status sp_world_generate(const sp_experiment* experiment, const char* environment,
                            uint64_t seed, sp_world** out) {
  return guarded([&] {
    require(experiment != nullptr && out != nullptr, "experiment and out must not be null");
    const ExperimentConfig& cfg = experiment->config;
    const EnvSpec& env = find_environment(cfg, environment);
    WorldConfig world = env.generator(cfg.generator)(seed);
    *out = new sp_world{cfg.episode_context(), world, Simulation(cfg.sim)};
  });
}

sp_status sp_world_from_json(const sp_experiment* experiment, const char* json_text,
                             sp_world** out) {
  return guarded([&] {
    require(experiment && json_text && out, "experiment, json_text and out must not be null");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::InvalidWorld, std::string("world: malformed JSON: ") + e.what());
    }
    WorldConfig world = world_from_json(doc);
    validate_world(world, experiment->config.sim);
    *out = new sp_world{experiment->config.episode_context(), world,
                        Simulation(experiment->config.sim)};
  });
}

void sp_world_free(sp_world* world) { delete world; }

sp_status sp_world_reset(sp_world* world, double* observation_out, size_t capacity) {
  return guarded([&] {
    require(world != nullptr, "world must not be null");
    copy_observation(world->sim.reset(world->world), observation_out, capacity);
  });
}

sp_status sp_world_step(sp_world* world, int action, double* observation_out, size_t capacity,
                        sp_step_result* result_out) {
  return guarded([&] {
    require(world != nullptr, "world must not be null");
    const Action a{action};
    require(a.valid(), "action must lie in [0, 9)");
    StepOutcome o = world->sim.step(a);
    copy_observation(o.observation, observation_out, capacity);
    if (result_out) {
      const RewardInputs& in = o.reward_inputs;
      result_out->reward = step_reward(world->ctx.reward_kind, in, world->ctx.reward);
      result_out->done = o.done ? 1 : 0;
      result_out->reason = to_c(o.done_reason);
      result_out->collided = in.collided ? 1 : 0;
      result_out->reached = in.reached ? 1 : 0;
      result_out->speed = in.speed;
      result_out->has_deviation = in.deviation.has_value() ? 1 : 0;
      result_out->deviation = in.deviation.value_or(0.0);
    }
  });
}

sp_status sp_world_pose(const sp_world* world, double* x, double* y, double* heading) {
  return guarded([&] {
    require(world != nullptr, "world must not be null");
    const VehicleState& s = world->sim.state();
    if (x) *x = s.pose.x;
    if (y) *y = s.pose.y;
    if (heading) *heading = s.pose.heading;
  });
}

sp_status sp_plain_reward(int collided, int reached, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    *out = plain_reward(collided != 0, reached != 0, RewardConfig{});
  });
}

sp_status sp_coupled_reward(int collided, double speed, double expected_speed, int has_deviation,
                            double deviation, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    RewardConfig cfg;
    cfg.expected_speed = expected_speed;
    cfg.validate();
    std::optional<double> dev;
    if (has_deviation) dev = deviation;
    *out = coupled_reward(collided != 0, speed, dev, cfg);
  });
}

}  // extern "C"
