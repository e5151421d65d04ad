#include "speedplan/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "speedplan/error.hpp"

namespace speedplan {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

EpisodeRecord run_episode(const WorldConfig& world, const EpisodeContext& ctx,
                          const Policy& policy, bool record) {
  Simulation sim(ctx.sim);
  Observation obs = sim.reset(world);
  EpisodeRecord rec;
  double speed_sum = 0.0;
  if (record) rec.steps.reserve(static_cast<std::size_t>(ctx.sim.max_steps));
  while (!sim.done()) {
    const Action action = policy(obs);
    const Vec2 before = sim.state().pose.position();
    StepOutcome out = sim.step(action);
    const double reward = step_reward(ctx.reward_kind, out.reward_inputs, ctx.reward);
    const VehicleState& s = sim.state();
    rec.path_length += distance(before, s.pose.position());
    speed_sum += s.linear_speed;
    rec.total_reward += reward;
    ++rec.step_count;
    if (record) {
      rec.steps.push_back({rec.step_count * ctx.sim.dt, s.pose.x, s.pose.y, s.pose.heading,
                           s.linear_speed, action.index, reward});
    }
    if (out.done) rec.outcome = out.done_reason;
    obs = std::move(out.observation);
  }
  rec.average_speed = speed_sum / rec.step_count;
  rec.distance_over_time = rec.path_length / (rec.step_count * ctx.sim.dt);
  return rec;
}

EpisodeRecord run_episode(const WorldConfig& world, const EpisodeContext& ctx,
                          const Agent& agent, double epsilon, std::mt19937_64& rng,
                          bool record) {
  if (agent.online().input_size() != ctx.sim.observation_size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "agent expects observations of size " +
                    std::to_string(agent.online().input_size()) + ", world produces " +
                    std::to_string(ctx.sim.observation_size()));
  }
  return run_episode(
      world, ctx, [&](const Observation& o) { return agent.act(o, epsilon, rng); }, record);
}

WorldGenerator EnvSpec::generator(const GeneratorParams& gen) const {
  if (layout == EnvLayout::Corridor) {
    return [w = width, h = height](std::uint64_t) { return corridor_world(w, h - 2.0); };
  }
  return [w = width, h = height, n = obstacles, gen](std::uint64_t seed) {
    return generate_world(w, h, n, seed, gen);
  };
}

EvalSummary evaluate(const WorldGenerator& generator, const EpisodeContext& ctx,
                     const Agent& agent, int episodes, std::uint64_t seed_base,
                     bool record) {
  if (episodes < 1) throw Error(ErrorCode::InvalidArgument, "evaluation needs at least one episode");
  EvalSummary sum;
  sum.episodes = episodes;
  std::mt19937_64 unused(0);  // epsilon = 0 never draws
  for (int i = 0; i < episodes; ++i) {
    const WorldConfig world = generator(derive_seed(seed_base, 0, static_cast<std::uint64_t>(i)));
    EpisodeRecord rec = run_episode(world, ctx, agent, 0.0, unused, record);
    sum.success_rate += rec.outcome == DoneReason::Goal;
    sum.collision_rate += rec.outcome == DoneReason::Collision;
    sum.timeout_rate += rec.outcome == DoneReason::Timeout;
    sum.mean_speed += rec.average_speed;
    sum.mean_distance_over_time += rec.distance_over_time;
    sum.mean_return += rec.total_reward;
    sum.records.push_back(std::move(rec));
  }
  const double n = episodes;
  sum.success_rate /= n;
  sum.collision_rate /= n;
  sum.timeout_rate /= n;
  sum.mean_speed /= n;
  sum.mean_distance_over_time /= n;
  sum.mean_return /= n;
  return sum;
}

void TrainSettings::validate() const {
  if (warmup < 0) throw Error(ErrorCode::InvalidArgument, "warmup must be non-negative");
  if (budget < warmup) {
    throw Error(ErrorCode::InvalidArgument, "training budget must be at least the warmup");
  }
  if (eval_interval <= 0) throw Error(ErrorCode::InvalidArgument, "eval_interval must be positive");
  if (eval_episodes <= 0) throw Error(ErrorCode::InvalidArgument, "eval_episodes must be positive");
}

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t {
  kInitStream = 1,
  kPolicyStream = 2,
  kWorldStream = 3,
  kValidationStream = 4,
};

}  // namespace

namespace {
std::atomic<bool> g_interrupt{false};
}  // namespace

void request_interrupt() { g_interrupt.store(true, std::memory_order_relaxed); }
void clear_interrupt() { g_interrupt.store(false, std::memory_order_relaxed); }
bool interrupt_requested() { return g_interrupt.load(std::memory_order_relaxed); }

TrainResult train(const WorldGenerator& generator, const EpisodeContext& ctx,
                  const AgentConfig& agent_config, const TrainSettings& settings,
                  std::uint64_t seed, const ProgressCallback& progress) {
  settings.validate();
  Agent agent(agent_config, ctx.sim.observation_size(), derive_seed(seed, kInitStream));
  ReplayBuffer buffer(static_cast<std::size_t>(agent_config.replay_capacity));
  std::mt19937_64 rng(derive_seed(seed, kPolicyStream));
  Simulation sim(ctx.sim);

  TrainResult result{agent, {}, 0, 0};
  std::optional<MlpParams> best;
  double best_success = -1.0;

  std::int64_t episode = 0;
  Observation obs = sim.reset(generator(derive_seed(seed, kWorldStream, 0)));
  std::optional<Transition> pending;
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;

  for (std::int64_t step = 0; step < settings.budget; ++step) {
    if (interrupt_requested()) {
      throw Error(ErrorCode::Interrupted, "training interrupted at step " + std::to_string(step));
    }
    const double epsilon = step < settings.warmup ? 1.0 : agent_config.epsilon_at(step);
    const Action action = agent.act(obs, epsilon, rng);
    StepOutcome out = sim.step(action);
    agent.count_env_step();
    const double reward = step_reward(ctx.reward_kind, out.reward_inputs, ctx.reward);
    const bool reached = out.done_reason == DoneReason::Goal;
    Transition t{obs, action, reward, out.observation,
                 out.reward_inputs.collided || (reached && settings.goal_terminal)};
    if (reached && !settings.goal_terminal) {
      pending = std::move(t);
    } else {
      buffer.push(std::move(t));
    }
    obs = std::move(out.observation);
    if (out.done) {
      ++episode;
      obs = sim.reset(generator(derive_seed(seed, kWorldStream,
                                            static_cast<std::uint64_t>(episode))));
      if (pending) {
        pending->next_state = obs;
        buffer.push(std::move(*pending));
        pending.reset();
      }
    }

    if (step + 1 > settings.warmup &&
        buffer.size() >= static_cast<std::size_t>(agent_config.batch_size)) {
      loss_sum += agent.train_step(buffer, rng);
      ++loss_count;
    }

    if ((step + 1) % settings.eval_interval == 0 || step + 1 == settings.budget) {
      const EvalSummary ev = evaluate(generator, ctx, agent, settings.eval_episodes,
                                      derive_seed(seed, kValidationStream), false);
      CurvePoint p;
      p.env_step = step + 1;
      p.gradient_steps = agent.gradient_steps();
      p.epsilon = epsilon;
      p.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
      p.success_rate = ev.success_rate;
      p.mean_speed = ev.mean_speed;
      p.collision_rate = ev.collision_rate;
      result.curve.push_back(p);
      if (progress) progress(p);
      loss_sum = 0.0;
      loss_count = 0;
      // Later checkpoints win ties so a flat curve returns the final network.
      if (step + 1 > settings.warmup && ev.success_rate >= best_success) {
        best_success = ev.success_rate;
        best = agent.online();
        result.selected_step = step + 1;
      }
    }
  }

  result.episodes = episode;
  result.agent = agent;
  if (settings.keep_best && best) {
    result.agent.online_mutable() = *best;
    result.agent.sync_target();
  } else {
    result.selected_step = settings.budget;
  }
  return result;
}

const ExperimentCell* ExperimentResult::find(std::string_view env, RewardKind kind) const {
  for (const ExperimentCell& c : cells) {
    if (c.environment == env && c.reward_kind == kind) return &c;
  }
  return nullptr;
}

ExperimentResult compare_rewards(const EpisodeContext& base_ctx,
                                 const AgentConfig& agent_config,
                                 const CompareSettings& settings,
                                 const CellCallback& on_cell) {
  if (settings.environments.empty()) {
    throw Error(ErrorCode::InvalidArgument, "compare needs at least one environment");
  }
  if (settings.reward_kinds.empty()) {
    throw Error(ErrorCode::InvalidArgument, "compare needs at least one reward kind");
  }
  if (settings.n_eval < 1) throw Error(ErrorCode::InvalidArgument, "n_eval must be at least 1");
  if (settings.training_seeds < 1) {
    throw Error(ErrorCode::InvalidArgument, "training_seeds must be at least 1");
  }
  settings.train.validate();

  struct Job {
    std::size_t env;
    RewardKind kind;
  };
  std::vector<Job> jobs;
  for (std::size_t e = 0; e < settings.environments.size(); ++e) {
    for (RewardKind k : settings.reward_kinds) jobs.push_back({e, k});
  }

  ExperimentResult result;
  result.cells.resize(jobs.size());
  std::mutex callback_mutex;

  auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    const EnvSpec& env = settings.environments[job.env];
    ExperimentCell& cell = result.cells[j];
    cell.environment = env.name;
    cell.reward_kind = job.kind;
    try {
      EpisodeContext ctx = base_ctx;
      ctx.reward_kind = job.kind;
      const WorldGenerator gen = env.generator(settings.generator);
      for (int s = 0; s < settings.training_seeds; ++s) {
        // Both reward kinds share the training seed of their environment.
        const std::uint64_t train_seed =
            derive_seed(settings.seed, 100 + job.env, static_cast<std::uint64_t>(s));
        if (s == 0) cell.training_seed = train_seed;
        TrainResult trained = train(gen, ctx, agent_config, settings.train, train_seed);
        EvalSummary ev =
            evaluate(gen, ctx, trained.agent, settings.n_eval, env.eval_seed, true);
        for (const EpisodeRecord& r : ev.records) {
          cell.episode_speeds.push_back(r.average_speed);
          cell.outcomes.emplace_back(to_string(r.outcome));
          cell.success_rate += r.outcome == DoneReason::Goal;
          cell.collision_rate += r.outcome == DoneReason::Collision;
          cell.timeout_rate += r.outcome == DoneReason::Timeout;
          cell.mean_distance_over_time += r.distance_over_time;
        }
        if (on_cell) {
          std::lock_guard lock(callback_mutex);
          ExperimentCell partial = cell;
          partial.n = static_cast<int>(partial.episode_speeds.size());
          on_cell(partial, trained, ev);
        }
      }
      cell.n = static_cast<int>(cell.episode_speeds.size());
      double speed_sum = 0.0;
      for (double v : cell.episode_speeds) speed_sum += v;
      const double n = cell.n;
      cell.mean_speed = speed_sum / n;
      cell.success_rate /= n;
      cell.collision_rate /= n;
      cell.timeout_rate /= n;
      cell.mean_distance_over_time /= n;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  const int threads = std::max(1, std::min<int>(settings.threads, static_cast<int>(jobs.size())));
  if (threads == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) run_job(j);
      });
    }
    for (std::thread& th : pool) th.join();
  }
  result.complete = std::none_of(result.cells.begin(), result.cells.end(),
                                 [](const ExperimentCell& c) { return !c.error.empty(); });
  return result;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void export_episode(const EpisodeRecord& record, const WorldConfig& world,
                    const std::filesystem::path& stem) {
  if (record.steps.empty()) {
    throw Error(ErrorCode::InvalidArgument, "cannot export an episode without a step log");
  }
  const std::filesystem::path csv_path = stem.string() + ".csv";
  const std::filesystem::path plot_path = stem.string() + "_plot.json";
  {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw Error(ErrorCode::Io, "cannot write " + csv_path.string());
    csv << "t,x,y,heading,speed,reward\n";
    for (const StepRecord& s : record.steps) {
      csv << format_double(s.t) << ',' << format_double(s.x) << ',' << format_double(s.y)
          << ',' << format_double(s.heading) << ',' << format_double(s.speed) << ','
          << format_double(s.reward) << '\n';
    }
    if (!csv) throw Error(ErrorCode::Io, "error while writing " + csv_path.string());
  }

  nlohmann::json plot;
  nlohmann::json time = nlohmann::json::array();
  nlohmann::json speed = nlohmann::json::array();
  nlohmann::json polyline = nlohmann::json::array();
  polyline.push_back({world.start.x, world.start.y});
  for (const StepRecord& s : record.steps) {
    time.push_back(s.t);
    speed.push_back(s.speed);
    polyline.push_back({s.x, s.y});
  }
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Obstacle& o : world.obstacles) {
    obstacles.push_back({{"center_x", o.center_x}, {"center_y", o.center_y}, {"radius", o.radius}});
  }
  plot["speed_vs_time"] = {{"t", time}, {"speed", speed}};
  plot["trajectory"] = polyline;
  plot["obstacles"] = obstacles;
  plot["goal"] = {world.goal.x, world.goal.y};
  plot["world"] = {{"width", world.width}, {"height", world.height}};
  plot["outcome"] = to_string(record.outcome);
  plot["average_speed"] = record.average_speed;
  plot["distance_over_time"] = record.distance_over_time;

  std::ofstream out(plot_path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + plot_path.string());
  out << plot.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::Io, "error while writing " + plot_path.string());
}

std::vector<StepRecord> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y,heading,speed,reward") {
    throw Error(ErrorCode::Io, path.string() + ": missing trajectory header");
  }
  std::vector<StepRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v[6];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int i = 0; i < 6; ++i) {
      auto [ptr, ec] = std::from_chars(p, end, v[i]);
      if (ec != std::errc() || (i < 5 && (ptr == end || *ptr != ','))) {
        throw Error(ErrorCode::Io, path.string() + ": malformed row '" + line + "'");
      }
      p = ptr + (i < 5 ? 1 : 0);
    }
    rows.push_back({v[0], v[1], v[2], v[3], v[4], 0, v[5]});
  }
  return rows;
}

}  // namespace speedplan
