#include <fstream>
#include <set>

#include "speedplan/config.hpp"
#include "speedplan/error.hpp"

namespace speedplan {

using nlohmann::json;

json world_to_json(const WorldConfig& world) {
  json obstacles = json::array();
  for (const Obstacle& o : world.obstacles) {
    obstacles.push_back({{"center_x", o.center_x}, {"center_y", o.center_y}, {"radius", o.radius}});
  }
  return {{"width", world.width},
          {"height", world.height},
          {"obstacles", obstacles},
          {"goal", {{"x", world.goal.x}, {"y", world.goal.y}}},
          {"goal_tolerance", world.goal_tolerance},
          {"start", {{"x", world.start.x}, {"y", world.start.y}, {"heading", world.start.heading}}},
          {"rng_seed", world.rng_seed}};
}

namespace {

void expect_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidWorld, where + ": expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const char* k : keys) {
    if (!j.contains(k)) throw Error(ErrorCode::InvalidWorld, where + ": missing field '" + k + "'");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw Error(ErrorCode::InvalidWorld, where + ": unknown field '" + it.key() + "'");
    }
  }
}

}  // namespace

WorldConfig world_from_json(const json& j) {
  try {
    expect_keys(j, {"width", "height", "obstacles", "goal", "goal_tolerance", "start", "rng_seed"},
                "world");
    WorldConfig w;
    w.width = j.at("width").get<double>();
    w.height = j.at("height").get<double>();
    for (const json& o : j.at("obstacles")) {
      expect_keys(o, {"center_x", "center_y", "radius"}, "world.obstacles[]");
      w.obstacles.push_back(
          {o.at("center_x").get<double>(), o.at("center_y").get<double>(), o.at("radius").get<double>()});
    }
    expect_keys(j.at("goal"), {"x", "y"}, "world.goal");
    w.goal = {j.at("goal").at("x").get<double>(), j.at("goal").at("y").get<double>()};
    w.goal_tolerance = j.at("goal_tolerance").get<double>();
    const json& s = j.at("start");
    expect_keys(s, {"x", "y", "heading"}, "world.start");
    w.start = Pose2D(s.at("x").get<double>(), s.at("y").get<double>(), s.at("heading").get<double>());
    w.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    return w;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidWorld, std::string("world: ") + e.what());
  }
}

json curve_to_json(const std::vector<CurvePoint>& curve) {
  json points = json::array();
  for (const CurvePoint& p : curve) {
    points.push_back({{"step", p.env_step},
                      {"gradient_steps", p.gradient_steps},
                      {"epsilon", p.epsilon},
                      {"mean_loss", p.mean_loss},
                      {"eval_success_rate", p.success_rate},
                      {"eval_mean_speed", p.mean_speed},
                      {"eval_collision_rate", p.collision_rate}});
  }
  return {{"points", points}};
}

json results_to_json(const ExperimentResult& result, const ExperimentConfig& config) {
  json cells = json::array();
  for (const ExperimentCell& c : result.cells) {
    json cell = {{"environment", c.environment},
                 {"reward_kind", to_string(c.reward_kind)},
                 {"n", c.n},
                 {"mean_speed", c.mean_speed},
                 {"success_rate", c.success_rate},
                 {"collision_rate", c.collision_rate},
                 {"timeout_rate", c.timeout_rate},
                 {"mean_distance_over_time", c.mean_distance_over_time},
                 {"episode_speeds", c.episode_speeds},
                 {"outcomes", c.outcomes},
                 {"training_seed", c.training_seed}};
    if (!c.error.empty()) cell["error"] = c.error;
    cells.push_back(std::move(cell));
  }

  // Reward kind x environment grid of mean speeds; null marks a failed cell.
  json columns = json::array();
  for (const EnvSpec& e : config.environments) columns.push_back(e.name);
  json rows = json::array();
  json grid = json::array();
  for (RewardKind k : config.compare_kinds) {
    rows.push_back(to_string(k));
    json row = json::array();
    for (const EnvSpec& e : config.environments) {
      const ExperimentCell* c = result.find(e.name, k);
      row.push_back(c && c->error.empty() ? json(c->mean_speed) : json(nullptr));
    }
    grid.push_back(std::move(row));
  }

  return {{"complete", result.complete},
          {"algorithm", to_string(config.agent.algorithm)},
          {"expected_speed", config.reward.expected_speed},
          {"speed_metric", "mean of per-step linear speed, averaged over evaluation episodes"},
          {"cells", cells},
          {"table", {{"rows", rows}, {"columns", columns}, {"mean_speed", grid}}}};
}

void save_checkpoint(const Agent& agent, const ExperimentConfig& config,
                     const std::filesystem::path& stem, std::int64_t selected_step) {
  const std::filesystem::path bin = stem.string() + ".bin";
  save_params(agent.online(), bin);
  json sidecar = {{"format", "speedplan-checkpoint-1"},
                  {"network", bin.filename().string()},
                  {"layer_sizes", agent.online().sizes()},
                  {"env_steps", agent.env_steps()},
                  {"gradient_steps", agent.gradient_steps()},
                  {"selected_step", selected_step},
                  {"config", config_to_json(config)}};
  write_json_file(sidecar, stem.string() + ".json");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::filesystem::path bin = path;
  std::filesystem::path side = path;
  if (path.extension() == ".bin") {
    side.replace_extension(".json");
  } else if (path.extension() == ".json") {
    bin.replace_extension(".bin");
  } else {
    bin = path.string() + ".bin";
    side = path.string() + ".json";
  }
  LoadedCheckpoint out;
  try {
    out.params = load_params(bin);
  } catch (const Error& e) {
    throw Error(e.code(), bin.string() + ": " + e.what());
  }
  std::ifstream in(side);
  if (in) {
    try {
      out.sidecar = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Io, side.string() + ": malformed sidecar: " + e.what());
    }
  }
  return out;
}

}  // namespace speedplan
