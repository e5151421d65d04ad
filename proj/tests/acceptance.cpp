// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. The comparison criteria drive the real CLI binary.
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "speedplan/harness.hpp"
#include "speedplan/reward.hpp"

using namespace speedplan;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

double cpu_seconds_self() {
  return static_cast<double>(std::clock()) / CLOCKS_PER_SEC;
}

double cpu_seconds_children() {
  rusage ru{};
  getrusage(RUSAGE_CHILDREN, &ru);
  return static_cast<double>(ru.ru_utime.tv_sec + ru.ru_stime.tv_sec) +
         static_cast<double>(ru.ru_utime.tv_usec + ru.ru_stime.tv_usec) * 1e-6;
}

// fork/exec so the child's CPU time lands in RUSAGE_CHILDREN; output goes to
// a log file next to the run directory.
int run_cli(const std::string& cli, const std::vector<std::string>& args, const fs::path& log) {
  std::vector<char*> argv;
  std::vector<std::string> all{cli};
  all.insert(all.end(), args.begin(), args.end());
  for (std::string& a : all) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::fflush(nullptr);
  const pid_t pid = fork();
  if (pid == 0) {
    if (std::freopen(log.c_str(), "w", stdout) && std::freopen(log.c_str(), "a", stderr)) {
      execv(cli.c_str(), argv.data());
    }
    _exit(127);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reward suite: every documented value of both reward functions.
void reward_suite() {
  const RewardConfig cfg;
  const double far = degrees_to_radians(40.0), near = degrees_to_radians(10.0);
  struct Case {
    const char* name;
    double got;
    double want;
  };
  std::vector<Case> cases{
      {"plain collision", plain_reward(true, false, cfg), -100.0},
      {"plain reach", plain_reward(false, true, cfg), 100.0},
      {"plain neither", plain_reward(false, false, cfg), 10.0},
      {"coupled collision", coupled_reward(true, 1.2, far, cfg), -100.0},
      {"coupled far peak", coupled_reward(false, 1.2, far, cfg), 40.0},
      {"coupled far off-peak", coupled_reward(false, 2.2, far, cfg), 32.130613194252668},
      {"coupled near peak", coupled_reward(false, 1.2, near, cfg), 20.0},
      {"coupled else branch", coupled_reward(false, 0.7, std::nullopt, cfg), 10.0},
      {"coupled at threshold", coupled_reward(false, 1.2, cfg.angle_threshold, cfg), 20.0},
      {"coupled reach", step_reward(RewardKind::Coupled, {false, true, 1.2, far}, cfg), 140.0},
      {"plain reach once", step_reward(RewardKind::Plain, {false, true, 1.2, far}, cfg), 100.0},
  };
  for (double v = 0.0; v <= 2.0; v += 0.1) {
    cases.push_back({"far/near ratio", coupled_reward(false, v, far, cfg),
                     2.0 * coupled_reward(false, v, near, cfg)});
  }
  int bad = 0;
  std::string first;
  for (const Case& c : cases) {
    if (!(std::abs(c.got - c.want) <= 1e-12)) {
      if (bad++ == 0) first = c.name;
    }
  }
  report(3, bad == 0,
         std::to_string(cases.size()) + " reward cases, " + std::to_string(bad) + " off by more than 1e-12" +
             (bad ? " (first: " + first + ")" : ""));
}

void geometry_suite() {
  const oracles::GeometryOracleStats g = oracles::geometry_oracle(10000, 20240611);
  const double rot = oracles::rotation_worst_error(10000, 777);
  report(4, g.mismatches == 0 && rot < 1e-9,
         std::to_string(g.scenes) + " scenes, " + std::to_string(g.mismatches) + " oracle mismatches (" +
             std::to_string(g.hits) + " heading hits), worst rotation error " +
             [&] { std::ostringstream s; s << rot; return s.str(); }() + " rad");
}

void ddqn_suite() {
  const oracles::DdqnOrderingStats s = oracles::ddqn_ordering(1000, 4242);
  report(5, s.violations == 0 && s.single_action_mismatch == 0 && s.same_params_mismatch == 0,
         std::to_string(s.cases) + " cases, " + std::to_string(s.violations) + " violations, " +
             std::to_string(s.single_action_mismatch) + " single-action and " +
             std::to_string(s.same_params_mismatch) + " shared-parameter mismatches");
}

void gradient_suite() {
  const oracles::GradientCheckStats s = oracles::gradient_check(100, 31337);
  std::ostringstream e;
  e << s.max_relative_error;
  report(6, s.max_relative_error < 1e-4,
         std::to_string(s.instances) + " instances, max relative error " + e.str());
}

void corridor_suite() {
  const EnvSpec corridor{"corridor", 4.0, 8.0, 0, 3000, EnvLayout::Corridor};
  TrainSettings settings;
  settings.budget = 50000;
  settings.eval_interval = 5000;
  const AgentConfig agent_cfg;  // DDQN defaults
  EpisodeContext ctx;
  ctx.reward_kind = RewardKind::Coupled;
  const double t0 = cpu_seconds_self();
  const TrainResult r = train(corridor.generator(), ctx, agent_cfg, settings, 8);
  const EvalSummary ev = evaluate(corridor.generator(), ctx, r.agent, 20, corridor.eval_seed, false);
  const double cpu = cpu_seconds_self() - t0;
  report(8, ev.success_rate >= 0.9 && cpu <= 300.0,
         "corridor DDQN success " + fmt(ev.success_rate, 2) + " after " +
             std::to_string(r.agent.env_steps()) + " env steps (checkpoint at " +
             std::to_string(r.selected_step) + "), " + fmt(cpu, 1) + " s CPU");
}

struct CellView {
  double mean_speed = NAN;
  double success_rate = NAN;
};

std::optional<CellView> find_cell(const nlohmann::json& results, const std::string& env,
                                  const std::string& kind) {
  for (const auto& c : results.at("cells")) {
    if (c.at("environment") == env && c.at("reward_kind") == kind && !c.contains("error")) {
      return CellView{c.at("mean_speed").get<double>(), c.at("success_rate").get<double>()};
    }
  }
  return std::nullopt;
}

// Every regular file under `a` must exist under `b` with identical bytes, and
// vice versa.
std::string compare_trees(const fs::path& a, const fs::path& b, int& files) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) return "file sets differ";
  files = static_cast<int>(rel_a.size());
  for (const fs::path& r : rel_a) {
    if (slurp(a / r) != slurp(b / r)) return r.string() + " differs";
  }
  return {};
}

void comparison_suite(const std::string& cli, const fs::path& config, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path run1 = work / "run1", run2 = work / "run2";

  const double before = cpu_seconds_children();
  const int code1 = run_cli(cli, {"--config", config.string(), "--out", run1.string(), "compare"},
                            work / "run1.log");
  const double cpu1 = cpu_seconds_children() - before;
  std::cout << "first comparison: exit " << code1 << ", " << fmt(cpu1, 1) << " s CPU" << std::endl;

  nlohmann::json results;
  bool parsed = false;
  try {
    results = nlohmann::json::parse(slurp(run1 / "results.json"));
    parsed = true;
  } catch (const std::exception& e) {
    std::cout << "cannot read results.json: " << e.what() << std::endl;
  }

  const std::optional<CellView> plain = parsed ? find_cell(results, "10x15", "plain") : std::nullopt;
  const std::optional<CellView> coupled = parsed ? find_cell(results, "10x15", "coupled") : std::nullopt;
  const std::optional<CellView> coupled_big = parsed ? find_cell(results, "25x25", "coupled") : std::nullopt;

  if (plain && coupled) {
    const double ratio = plain->mean_speed > 0 ? coupled->mean_speed / plain->mean_speed : INFINITY;
    const bool pass = code1 == 0 && ratio >= 1.25 && coupled->mean_speed >= 0.8 &&
                      coupled->success_rate >= 0.7 && cpu1 <= 1800.0;
    report(1, pass,
           "10x15 coupled speed " + fmt(coupled->mean_speed) + " m/s vs plain " + fmt(plain->mean_speed) +
               " m/s (ratio " + fmt(ratio, 2) + ", need >= 1.25), coupled success " +
               fmt(coupled->success_rate, 2) + " (need >= 0.7), coupled speed need >= 0.8, 2x2 CPU " +
               fmt(cpu1 / 60.0, 1) + " min (need <= 30)");
  } else {
    report(1, false, "comparison did not produce both 10x15 cells (exit " + std::to_string(code1) + ")");
  }
  if (coupled && coupled_big) {
    report(2, coupled_big->mean_speed >= coupled->mean_speed,
           "coupled speed 25x25 " + fmt(coupled_big->mean_speed) + " m/s vs 10x15 " +
               fmt(coupled->mean_speed) + " m/s");
  } else {
    report(2, false, "comparison did not produce both coupled cells");
  }

  const int code2 = run_cli(cli, {"--config", config.string(), "--out", run2.string(), "compare"},
                            work / "run2.log");
  int files = 0;
  const std::string diff = parsed ? compare_trees(run1, run2, files) : "first run produced no results";
  report(7, code1 == code2 && diff.empty(),
         diff.empty() ? std::to_string(files) + " output files bit-identical across two runs"
                      : "outputs differ: " + diff);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli, config;
  fs::path work = "acceptance_runs";
  bool skip_compare = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--config" && i + 1 < argc) config = argv[++i];
    else if (a == "--work" && i + 1 < argc) work = argv[++i];
    else if (a == "--skip-compare") skip_compare = true;
    else {
      std::cerr << "usage: acceptance --cli PATH --config PATH [--work DIR] [--skip-compare]\n";
      return 2;
    }
  }
  if (!skip_compare && (cli.empty() || config.empty())) {
    std::cerr << "acceptance: --cli and --config are required\n";
    return 2;
  }

  reward_suite();
  geometry_suite();
  ddqn_suite();
  gradient_suite();
  corridor_suite();
  if (!skip_compare) comparison_suite(cli, config, work);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
