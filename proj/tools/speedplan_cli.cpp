// speedplan command-line tool: train, compare, eval and export.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "speedplan/speedplan.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string algorithm;
};

struct Failure {
  int exit_code;
};

int exit_code_for(sp_status status) {
  switch (status) {
    case SP_ERR_CONFIG:
    case SP_ERR_INVALID_ARGUMENT:
    case SP_ERR_SHAPE_MISMATCH:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

void check(sp_status status, const char* what, std::optional<int> exit_code = std::nullopt) {
  if (status == SP_OK) return;
  std::fprintf(stderr, "error: %s: %s\n", what, sp_last_error());
  throw Failure{exit_code.value_or(exit_code_for(status))};
}

// Owning wrappers so early exits release the C handles.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Experiment = Handle<sp_experiment, sp_experiment_free>;
using AgentHandle = Handle<sp_agent, sp_agent_free>;
using EvalHandle = Handle<sp_eval, sp_eval_free>;
using ResultsHandle = Handle<sp_results, sp_results_free>;

void load_experiment(const CommonOptions& opt, Experiment& exp) {
  if (opt.config.empty()) {
    check(sp_experiment_create_default(exp.out()), "default configuration");
  } else {
    check(sp_experiment_load(opt.config.c_str(), exp.out()), "loading configuration", kExitUsage);
  }
  if (opt.seed) check(sp_experiment_set_seed(exp.get(), *opt.seed), "--seed");
  if (!opt.algorithm.empty()) {
    check(sp_experiment_set_algorithm(exp.get(), opt.algorithm.c_str()), "--algorithm");
  }
  if (!opt.out.empty()) check(sp_experiment_set_output_dir(exp.get(), opt.out.c_str()), "--out");
}

const char* env_arg(const std::string& env) { return env.empty() ? nullptr : env.c_str(); }

void print_line(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

int run_train(const CommonOptions& opt, const std::string& env) {
  Experiment exp;
  load_experiment(opt, exp);
  const fs::path out = sp_experiment_output_dir(exp.get());
  AgentHandle agent;
  check(sp_train(exp.get(), env_arg(env), print_line, nullptr, agent.out()), "training");
  const std::string stem = (out / "checkpoint").string();
  check(sp_agent_save(agent.get(), exp.get(), stem.c_str()), "saving checkpoint");
  std::printf("checkpoint: %s.bin\n", stem.c_str());
  return kExitOk;
}

const char* kind_name(sp_reward_kind k) { return k == SP_REWARD_PLAIN ? "plain" : "coupled"; }

void on_cell(const sp_cell* c, void*) {
  std::printf("cell %s/%s: mean speed %.3f m/s, success %.2f, collisions %.2f (n=%d)\n",
              c->environment, kind_name(c->reward_kind), c->mean_speed, c->success_rate,
              c->collision_rate, c->n);
  std::fflush(stdout);
}

void print_table(const sp_results* results) {
  std::vector<std::string> envs;
  std::vector<sp_reward_kind> kinds;
  std::map<std::pair<std::string, int>, sp_cell> cells;
  for (size_t i = 0; i < sp_results_cell_count(results); ++i) {
    sp_cell c;
    check(sp_results_cell(results, i, &c), "reading results");
    if (std::find(envs.begin(), envs.end(), c.environment) == envs.end()) {
      envs.emplace_back(c.environment);
    }
    if (std::find(kinds.begin(), kinds.end(), c.reward_kind) == kinds.end()) {
      kinds.push_back(c.reward_kind);
    }
    cells[{c.environment, c.reward_kind}] = c;
  }
  auto table = [&](const char* title, auto value) {
    std::printf("\n%-18s", title);
    for (const std::string& e : envs) std::printf("%12s", e.c_str());
    std::printf("\n");
    for (sp_reward_kind k : kinds) {
      std::printf("%-18s", kind_name(k));
      for (const std::string& e : envs) {
        auto it = cells.find({e, k});
        if (it == cells.end() || it->second.error) {
          std::printf("%12s", "failed");
        } else {
          std::printf("%12.3f", value(it->second));
        }
      }
      std::printf("\n");
    }
  };
  table("mean speed (m/s)", [](const sp_cell& c) { return c.mean_speed; });
  table("success rate", [](const sp_cell& c) { return c.success_rate; });
  table("collision rate", [](const sp_cell& c) { return c.collision_rate; });
}

int run_compare(const CommonOptions& opt) {
  Experiment exp;
  load_experiment(opt, exp);
  const std::string out = sp_experiment_output_dir(exp.get());
  ResultsHandle results;
  check(sp_compare(exp.get(), on_cell, nullptr, results.out()), "comparison");
  print_table(results.get());
  check(sp_results_write(results.get(), exp.get(), out.c_str()), "writing results");
  std::printf("\nresults: %s\n", (fs::path(out) / "results.json").c_str());
  if (!sp_results_complete(results.get())) {
    for (size_t i = 0; i < sp_results_cell_count(results.get()); ++i) {
      sp_cell c;
      if (sp_results_cell(results.get(), i, &c) == SP_OK && c.error) {
        std::fprintf(stderr, "error: cell %s/%s failed: %s\n", c.environment,
                     kind_name(c.reward_kind), c.error);
      }
    }
    std::fprintf(stderr, "error: comparison incomplete; results file flagged incomplete\n");
    return kExitRuntime;
  }
  return kExitOk;
}

void load_agent(const std::string& checkpoint, AgentHandle& agent) {
  check(sp_agent_load(checkpoint.c_str(), agent.out()), "loading checkpoint", kExitUsage);
}

int run_rollouts(const CommonOptions& opt, const std::string& checkpoint, const std::string& env,
                 std::optional<int> episodes, const char* subdir, bool print_episodes) {
  if (episodes && *episodes < 1) {
    std::fprintf(stderr, "error: --episodes must be at least 1 (got %d)\n", *episodes);
    return kExitUsage;
  }
  Experiment exp;
  load_experiment(opt, exp);
  AgentHandle agent;
  load_agent(checkpoint, agent);
  EvalHandle eval;
  const int n = episodes.value_or(print_episodes ? sp_experiment_n_eval(exp.get()) : 1);
  check(sp_evaluate(exp.get(), agent.get(), env_arg(env), n, eval.out()), "evaluation");
  const fs::path dir = fs::path(sp_experiment_output_dir(exp.get())) / subdir;
  check(sp_eval_export(eval.get(), dir.c_str(), "episode"), "exporting episodes");
  const sp_eval_summary s = sp_eval_get_summary(eval.get());
  if (print_episodes) {
    static const char* const kOutcome[] = {"running", "collision", "goal", "timeout"};
    for (int i = 0; i < s.episodes; ++i) {
      std::printf("episode %3d  %-9s  mean speed %.3f m/s\n", i,
                  kOutcome[sp_eval_episode_outcome(eval.get(), static_cast<size_t>(i))],
                  sp_eval_episode_speed(eval.get(), static_cast<size_t>(i)));
    }
  }
  std::printf("episodes %d  success rate %.3f  collision rate %.3f  mean speed %.4f m/s\n",
              s.episodes, s.success_rate, s.collision_rate, s.mean_speed);
  std::printf("episode files: %s\n", dir.c_str());
  return kExitOk;
}

void handle_sigint(int) { sp_request_interrupt(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speed-coupled reward navigation experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions opt;
  app.add_option("--config", opt.config, "Experiment configuration (JSON)");
  app.add_option("--out", opt.out, "Output directory (overrides harness.output_dir)");
  app.add_option("--seed", opt.seed, "Experiment seed (overrides harness.seed)");
  app.add_option("--algorithm", opt.algorithm, "Learning algorithm")
      ->check(CLI::IsMember({"dqn", "ddqn"}));

  std::string env;
  std::string checkpoint;
  std::optional<int> episodes;

  CLI::App* train = app.add_subcommand("train", "Train one agent and save a checkpoint");
  train->add_option("--env", env, "Environment name (default: first configured)");

  CLI::App* compare =
      app.add_subcommand("compare", "Train and evaluate every reward kind in every environment");

  CLI::App* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint .bin file or stem")->required();
  eval->add_option("--episodes", episodes, "Number of episodes (default: harness.n_eval)");
  eval->add_option("--env", env, "Environment name (default: first configured)");

  CLI::App* exporter =
      app.add_subcommand("export", "Write trajectories and plot data for greedy episodes");
  exporter->add_option("--checkpoint", checkpoint, "Checkpoint .bin file or stem")->required();
  exporter->add_option("--episodes", episodes, "Number of episodes (default: 1)");
  exporter->add_option("--env", env, "Environment name (default: first configured)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::signal(SIGINT, handle_sigint);
  std::signal(SIGTERM, handle_sigint);

  try {
    if (*train) return run_train(opt, env);
    if (*compare) return run_compare(opt);
    if (*eval) return run_rollouts(opt, checkpoint, env, episodes, "eval", true);
    if (*exporter) return run_rollouts(opt, checkpoint, env, episodes, "export", false);
  } catch (const Failure& f) {
    return f.exit_code;
  }
  return kExitUsage;
}
