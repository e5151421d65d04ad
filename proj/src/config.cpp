#include "speedplan/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "speedplan/error.hpp"

namespace speedplan {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::Config, "config error: " + what);
}

// Reads keys of one JSON object, remembering which were consumed so that
// anything left over can be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : path_(std::move(path)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) config_error(path_ + ": expected an object");
    doc_ = &doc;
  }

  template <typename T>
  void get(const char* key, T& out) {
    const json* value = find(key);
    if (!value) return;
    const std::string where = path_ + "." + key;
    if constexpr (std::is_floating_point_v<T>) {
      if (!value->is_number()) config_error(where + ": expected a number");
    } else if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      const bool ok = value->is_number_unsigned() ||
                      (value->is_number_integer() && value->get<std::int64_t>() >= 0);
      if (!ok) config_error(where + ": expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!value->is_number_integer()) config_error(where + ": expected an integer");
    }
    try {
      out = value->get<T>();
    } catch (const json::exception&) {
      config_error(where + ": wrong type (got " + value->type_name() + ")");
    }
  }

  const json* find(const char* key) {
    seen_.insert(key);
    if (!doc_) return nullptr;
    auto it = doc_->find(key);
    return it == doc_->end() ? nullptr : &*it;
  }

  void finish() const {
    if (!doc_) return;
    for (auto it = doc_->begin(); it != doc_->end(); ++it) {
      if (!seen_.count(it.key())) config_error("unknown key '" + path_ + "." + it.key() + "'");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json* doc_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

const json& child(const json& doc, const char* key) {
  static const json null_value;
  auto it = doc.find(key);
  return it == doc.end() ? null_value : *it;
}

// Runs a validate() that throws InvalidArgument and rethrows it as a config
// error prefixed with the section name.
template <typename F>
void validated(const std::string& section, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    config_error(section + ": " + e.what());
  }
}

EnvLayout layout_from_string(const std::string& name, const std::string& where) {
  if (name == "random") return EnvLayout::Random;
  if (name == "corridor") return EnvLayout::Corridor;
  config_error(where + ".layout: expected 'random' or 'corridor', got '" + name + "'");
}

void parse_world(const json& doc, ExperimentConfig& cfg) {
  Section s(doc, "world");
  if (const json* envs = s.find("environments")) {
    if (!envs->is_array() || envs->empty()) {
      config_error("world.environments: expected a non-empty array");
    }
    cfg.environments.clear();
    for (std::size_t i = 0; i < envs->size(); ++i) {
      const std::string where = "world.environments[" + std::to_string(i) + "]";
      Section e((*envs)[i], where);
      EnvSpec spec;
      std::string layout = "random";
      e.get("name", spec.name);
      e.get("width", spec.width);
      e.get("height", spec.height);
      e.get("obstacles", spec.obstacles);
      e.get("eval_seed", spec.eval_seed);
      e.get("layout", layout);
      e.finish();
      spec.layout = layout_from_string(layout, where);
      if (spec.name.empty()) spec.name = "env" + std::to_string(i);
      if (!(spec.width > 0.0) || !(spec.height > 0.0)) {
        config_error(where + ": width and height must be positive");
      }
      if (spec.obstacles < 0) config_error(where + ".obstacles: must be non-negative");
      for (const EnvSpec& other : cfg.environments) {
        if (other.name == spec.name) config_error(where + ".name: duplicate '" + spec.name + "'");
      }
      cfg.environments.push_back(spec);
    }
  }
  SimParams& p = cfg.sim;
  s.get("dt", p.dt);
  s.get("v_max", p.v_max);
  s.get("w_max", p.w_max);
  s.get("speed_delta", p.speed_delta);
  s.get("steer_delta", p.steer_delta);
  s.get("vehicle_radius", p.vehicle_radius);
  s.get("rays", p.n_rays);
  s.get("max_range", p.max_range);
  s.get("sensing_radius", p.sensing_radius);
  s.get("max_steps", p.max_steps);
  GeneratorParams& g = cfg.generator;
  s.get("goal_tolerance", g.goal_tolerance);
  s.get("obstacle_radius_min", g.radius_min);
  s.get("obstacle_radius_max", g.radius_max);
  s.get("obstacle_gap", g.obstacle_gap);
  s.get("start_goal_clearance", g.start_goal_clearance);
  s.get("wall_margin", g.wall_margin);
  s.finish();
  validated("world", [&] { p.validate(); });
  if (!(g.goal_tolerance > 0.0)) config_error("world.goal_tolerance: must be positive");
  if (!(g.radius_min > 0.0 && g.radius_max >= g.radius_min)) {
    config_error("world.obstacle_radius_min/max: need 0 < min <= max");
  }
  if (g.obstacle_gap < 0.0) config_error("world.obstacle_gap: must be non-negative");
  if (g.wall_margin <= p.vehicle_radius) {
    config_error("world.wall_margin: must exceed vehicle_radius");
  }
}

void parse_agent(const json& doc, ExperimentConfig& cfg) {
  Section s(doc, "agent");
  AgentConfig& a = cfg.agent;
  std::string algorithm(to_string(a.algorithm));
  s.get("algorithm", algorithm);
  s.get("gamma", a.gamma);
  s.get("learning_rate", a.learning_rate);
  s.get("momentum", a.momentum);
  s.get("batch_size", a.batch_size);
  s.get("replay_capacity", a.replay_capacity);
  s.get("target_sync_interval", a.target_sync_interval);
  s.get("epsilon_start", a.epsilon_start);
  s.get("epsilon_end", a.epsilon_end);
  s.get("epsilon_decay_steps", a.epsilon_decay_steps);
  s.get("max_grad_norm", a.max_grad_norm);
  s.get("hidden_sizes", a.hidden_sizes);
  s.finish();
  validated("agent", [&] {
    a.algorithm = algorithm_from_string(algorithm);
    a.validate();
  });
}

// Degrees for display and files; rounding hides the last-ulp noise of the
// radian round trip (30 rather than 29.999999999999996).
double threshold_degrees(double radians) { return std::round(radians * 180.0 / kPi * 1e9) / 1e9; }

void parse_reward(const json& doc, ExperimentConfig& cfg) {
  Section s(doc, "reward");
  RewardConfig& r = cfg.reward;
  std::string kind(to_string(cfg.reward_kind));
  double threshold_deg = threshold_degrees(r.angle_threshold);
  const bool has_threshold = s.find("angle_threshold_deg") != nullptr;
  s.get("kind", kind);
  s.get("expected_speed", r.expected_speed);
  s.get("angle_threshold_deg", threshold_deg);
  s.get("far_coefficient", r.far_coefficient);
  s.get("near_coefficient", r.near_coefficient);
  s.get("hit_penalty", r.hit_penalty);
  s.get("neutral_reward", r.neutral_reward);
  s.get("reach_bonus", r.reach_bonus);
  s.get("no_collision_reward", r.no_collision_reward);
  s.finish();
  // The threshold is configured in degrees and stored in radians from here on.
  if (has_threshold) r.angle_threshold = degrees_to_radians(threshold_deg);
  validated("reward", [&] {
    cfg.reward_kind = reward_kind_from_string(kind);
    r.validate();
  });
}

void parse_harness(const json& doc, ExperimentConfig& cfg) {
  Section s(doc, "harness");
  TrainSettings& t = cfg.train;
  std::vector<std::string> kinds;
  for (RewardKind k : cfg.compare_kinds) kinds.emplace_back(to_string(k));
  s.get("seed", cfg.seed);
  s.get("training_steps", t.budget);
  s.get("warmup_steps", t.warmup);
  s.get("eval_interval", t.eval_interval);
  s.get("eval_episodes", t.eval_episodes);
  s.get("keep_best", t.keep_best);
  s.get("goal_terminal", t.goal_terminal);
  s.get("n_eval", cfg.n_eval);
  s.get("training_seeds", cfg.training_seeds);
  s.get("reward_kinds", kinds);
  s.get("threads", cfg.threads);
  s.get("output_dir", cfg.output_dir);
  s.finish();
  validated("harness", [&] { t.validate(); });
  if (cfg.n_eval < 1) config_error("harness.n_eval: must be at least 1");
  if (cfg.training_seeds < 1) config_error("harness.training_seeds: must be at least 1");
  if (cfg.threads < 1) config_error("harness.threads: must be at least 1");
  if (kinds.empty()) config_error("harness.reward_kinds: must list at least one kind");
  if (cfg.output_dir.empty()) config_error("harness.output_dir: must not be empty");
  cfg.compare_kinds.clear();
  for (const std::string& k : kinds) {
    validated("harness.reward_kinds", [&] { cfg.compare_kinds.push_back(reward_kind_from_string(k)); });
  }
}

std::string layout_name(EnvLayout layout) {
  return layout == EnvLayout::Corridor ? "corridor" : "random";
}

}  // namespace

CompareSettings ExperimentConfig::compare_settings() const {
  CompareSettings s;
  s.environments = environments;
  s.reward_kinds = compare_kinds;
  s.n_eval = n_eval;
  s.training_seeds = training_seeds;
  s.seed = seed;
  s.train = train;
  s.generator = generator;
  s.threads = threads;
  return s;
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) config_error("top level: expected an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& k = it.key();
    if (k != "world" && k != "agent" && k != "reward" && k != "harness") {
      config_error("unknown key '" + k + "'");
    }
  }
  ExperimentConfig cfg;
  parse_world(child(doc, "world"), cfg);
  parse_agent(child(doc, "agent"), cfg);
  parse_reward(child(doc, "reward"), cfg);
  parse_harness(child(doc, "harness"), cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& c) {
  json envs = json::array();
  for (const EnvSpec& e : c.environments) {
    envs.push_back({{"name", e.name},
                    {"width", e.width},
                    {"height", e.height},
                    {"obstacles", e.obstacles},
                    {"eval_seed", e.eval_seed},
                    {"layout", layout_name(e.layout)}});
  }
  json kinds = json::array();
  for (RewardKind k : c.compare_kinds) kinds.push_back(to_string(k));
  return {
      {"world",
       {{"environments", envs},
        {"dt", c.sim.dt},
        {"v_max", c.sim.v_max},
        {"w_max", c.sim.w_max},
        {"speed_delta", c.sim.speed_delta},
        {"steer_delta", c.sim.steer_delta},
        {"vehicle_radius", c.sim.vehicle_radius},
        {"rays", c.sim.n_rays},
        {"max_range", c.sim.max_range},
        {"sensing_radius", c.sim.sensing_radius},
        {"max_steps", c.sim.max_steps},
        {"goal_tolerance", c.generator.goal_tolerance},
        {"obstacle_radius_min", c.generator.radius_min},
        {"obstacle_radius_max", c.generator.radius_max},
        {"obstacle_gap", c.generator.obstacle_gap},
        {"start_goal_clearance", c.generator.start_goal_clearance},
        {"wall_margin", c.generator.wall_margin}}},
      {"agent",
       {{"algorithm", to_string(c.agent.algorithm)},
        {"gamma", c.agent.gamma},
        {"learning_rate", c.agent.learning_rate},
        {"momentum", c.agent.momentum},
        {"batch_size", c.agent.batch_size},
        {"replay_capacity", c.agent.replay_capacity},
        {"target_sync_interval", c.agent.target_sync_interval},
        {"epsilon_start", c.agent.epsilon_start},
        {"epsilon_end", c.agent.epsilon_end},
        {"epsilon_decay_steps", c.agent.epsilon_decay_steps},
        {"max_grad_norm", c.agent.max_grad_norm},
        {"hidden_sizes", c.agent.hidden_sizes}}},
      {"reward",
       {{"kind", to_string(c.reward_kind)},
        {"expected_speed", c.reward.expected_speed},
        {"angle_threshold_deg", threshold_degrees(c.reward.angle_threshold)},
        {"far_coefficient", c.reward.far_coefficient},
        {"near_coefficient", c.reward.near_coefficient},
        {"hit_penalty", c.reward.hit_penalty},
        {"neutral_reward", c.reward.neutral_reward},
        {"reach_bonus", c.reward.reach_bonus},
        {"no_collision_reward", c.reward.no_collision_reward}}},
      {"harness",
       {{"seed", c.seed},
        {"training_steps", c.train.budget},
        {"warmup_steps", c.train.warmup},
        {"eval_interval", c.train.eval_interval},
        {"eval_episodes", c.train.eval_episodes},
        {"keep_best", c.train.keep_best},
        {"goal_terminal", c.train.goal_terminal},
        {"n_eval", c.n_eval},
        {"training_seeds", c.training_seeds},
        {"reward_kinds", kinds},
        {"threads", c.threads},
        {"output_dir", c.output_dir}}},
  };
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "error while writing " + path.string());
}

}  // namespace speedplan
