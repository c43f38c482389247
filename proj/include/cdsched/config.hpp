#pragma once

// JSON configuration: defaults, key=value overrides and conversion into the
// library's configuration structs.

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdsched/mcts.hpp"
#include "cdsched/model.hpp"
#include "cdsched/scenario.hpp"
#include "cdsched/sim.hpp"
#include "json.hpp"

namespace cdsched {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json default_config() {
  return json::parse(R"({
    "intersection": {
      "lanes_per_leg": 3,
      "lane_movements": [],
      "lane_width": 3.5,
      "control_zone_length": 300.0,
      "crossing_speed": {"left": 8.0, "straight": 12.0, "right": 6.0},
      "subzone_count": null,
      "routes": {}
    },
    "safety_gap": {"left": 2.0, "straight": 1.5, "right": 1.5},
    "kinematics": {"v_max": 15.0, "a_max": 3.0},
    "mcts": {
      "c": 0.05,
      "omega": 0.85,
      "budget_nodes": 1000,
      "budget_time": 0.0,
      "rollout": "heuristic",
      "rollouts_per_expansion": 1,
      "seed": 0
    },
    "scenario": {
      "vehicles": [],
      "random": {
        "vehicles": 30,
        "per_lane": [],
        "min_spacing": 8.0,
        "mean_extra_gap": 25.0,
        "speed_min_fraction": 0.6,
        "seed": 1
      }
    },
    "simulation": {
      "arrival_rates": [150, 300, 450],
      "lane_rates": [],
      "horizon": 1200.0,
      "replan_period": 2.0,
      "time_step": 0.1,
      "seed": 1,
      "seeds": 1,
      "min_entry_gap": 10.0,
      "strategies": ["fifo", "mcts"],
      "enumeration_cap": 200000,
      "trace": false
    },
    "enumerate": {"cap": 10000000, "bins": 200, "raw": false},
    "sweep": {
      "omega": [0.85],
      "c": [0.05],
      "budgets": [1000],
      "scenarios": 10,
      "seeds": 1
    }
  })");
}

namespace detail {

// Objects whose keys are free-form (lane ids), not checked against defaults.
inline bool open_object(const std::string& path) { return path == "/intersection/routes"; }

inline void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError(path + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key_path = path + "/" + it.key();
    if (!base.contains(it.key()) && !open_object(path)) throw ConfigError("unknown configuration key " + key_path);
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object() && !open_object(key_path) && !open_object(path))
      merge_checked(slot, it.value(), key_path);
    else
      slot = it.value();
  }
}

}  // namespace detail

/// Defaults overlaid with `file`; keys unknown to the defaults are rejected.
inline json effective_config(const json& file) {
  json config = default_config();
  detail::merge_checked(config, file, "");
  return config;
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
}

/// Applies `dotted.key=value`. The value is read as JSON when it parses,
/// otherwise as a plain string. The key must already exist.
inline void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  std::string pointer;
  std::stringstream parts(key);
  for (std::string part; std::getline(parts, part, '.');) pointer += "/" + part;
  const json::json_pointer ptr(pointer);
  if (!config.contains(ptr)) throw ConfigError("override references unknown key '" + key + "'");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  config[ptr] = value;
}

inline IntersectionConfig intersection_config_from_json(const json& j) {
  IntersectionConfig c;
  c.lanes_per_leg = j.at("lanes_per_leg").get<std::size_t>();
  c.lane_movements = j.at("lane_movements").get<std::vector<std::string>>();
  c.lane_width = j.at("lane_width").get<double>();
  c.control_zone_length = j.at("control_zone_length").get<double>();
  const json& speed = j.at("crossing_speed");
  c.left_speed = speed.at("left").get<double>();
  c.straight_speed = speed.at("straight").get<double>();
  c.right_speed = speed.at("right").get<double>();
  if (!j.at("subzone_count").is_null()) c.subzone_count = j.at("subzone_count").get<std::size_t>();
  for (auto it = j.at("routes").begin(); it != j.at("routes").end(); ++it) {
    RouteOverride o;
    o.subzones = it.value().at("subzones").get<std::vector<SubzoneId>>();
    o.offsets = it.value().at("offsets").get<std::vector<double>>();
    if (it.value().contains("clear_offset")) o.clear_offset = it.value().at("clear_offset").get<double>();
    std::size_t lane = 0;
    try {
      lane = std::stoul(it.key());
    } catch (const std::exception&) {
      throw ConfigError("route key '" + it.key() + "' is not a lane id");
    }
    c.routes[lane] = std::move(o);
  }
  return c;
}

inline json model_to_json(const IntersectionModel& model) {
  json lanes = json::array();
  for (LaneId lane = 0; lane < model.lane_count(); ++lane) {
    const Route& r = model.route(lane);
    lanes.push_back({{"lane", lane},
                     {"label", model.lane_label(lane)},
                     {"movement", to_string(model.movement(lane))},
                     {"subzones", r.subzones},
                     {"offsets", r.offsets},
                     {"clear_offset", r.clear_offset}});
  }
  return {{"legs", model.legs()},
          {"lanes_per_leg", model.lanes_per_leg()},
          {"subzone_count", model.subzone_count()},
          {"lane_width", model.lane_width()},
          {"control_zone_length", model.control_zone_length()},
          {"lanes", lanes}};
}

inline SafetyGapTable gaps_from_json(const json& j) {
  SafetyGapTable g;
  g[Movement::Left] = j.at("left").get<double>();
  g[Movement::Straight] = j.at("straight").get<double>();
  g[Movement::Right] = j.at("right").get<double>();
  g.validate();
  return g;
}

inline KinematicLimits kinematics_from_json(const json& j) {
  return {j.at("v_max").get<double>(), j.at("a_max").get<double>()};
}

inline MctsConfig mcts_config_from_json(const json& j) {
  MctsConfig c;
  c.c = j.at("c").get<double>();
  c.omega = j.at("omega").get<double>();
  c.budget_nodes = j.at("budget_nodes").get<std::size_t>();
  c.budget_time = j.at("budget_time").get<double>();
  c.rollout_policy = parse_rollout_policy(j.at("rollout").get<std::string>());
  c.rollouts_per_expansion = j.at("rollouts_per_expansion").get<std::size_t>();
  c.rng_seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

inline SnapshotSpec snapshot_spec_from_json(const json& j, const KinematicLimits& limits) {
  SnapshotSpec s;
  s.vehicles = j.at("vehicles").get<std::size_t>();
  s.per_lane = j.at("per_lane").get<std::vector<std::size_t>>();
  s.min_spacing = j.at("min_spacing").get<double>();
  s.mean_extra_gap = j.at("mean_extra_gap").get<double>();
  s.speed_min_fraction = j.at("speed_min_fraction").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.v_max = limits.v_max;
  s.a_max = limits.a_max;
  return s;
}

/// Explicit `scenario.vehicles` when given, a random snapshot otherwise.
inline std::vector<Vehicle> scenario_vehicles(const json& config, const IntersectionModel& model) {
  const KinematicLimits limits = kinematics_from_json(config.at("kinematics"));
  const json& listed = config.at("scenario").at("vehicles");
  if (listed.empty()) return random_snapshot(model, snapshot_spec_from_json(config.at("scenario").at("random"), limits));
  std::vector<Vehicle> vehicles;
  for (const json& v : listed) {
    Vehicle out;
    out.id = v.contains("id") ? v.at("id").get<std::string>() : "v" + std::to_string(vehicles.size());
    out.lane = v.at("lane").get<LaneId>();
    if (!model.has_lane(out.lane)) throw ConfigError("vehicle '" + out.id + "' on unknown lane");
    out.movement = v.contains("movement") ? parse_movement(v.at("movement").get<std::string>()) : model.movement(out.lane);
    out.distance_to_zone = v.at("distance").get<double>();
    out.v_max = v.value("v_max", limits.v_max);
    out.a_max = v.value("a_max", limits.a_max);
    out.speed = v.value("speed", out.v_max);
    vehicles.push_back(std::move(out));
  }
  const auto violations = validate_scenario(model, vehicles);
  if (!violations.empty()) throw ConfigError("invalid scenario: " + violations.front());
  return vehicles;
}

/// Simulation settings for one arrival rate and seed.
inline ScenarioConfig scenario_config_from_json(const json& config, double rate, std::uint64_t seed) {
  const json& sim = config.at("simulation");
  ScenarioConfig s;
  s.model = build_intersection(intersection_config_from_json(config.at("intersection")));
  s.gaps = gaps_from_json(config.at("safety_gap"));
  s.kinematics = kinematics_from_json(config.at("kinematics"));
  s.arrival_rate = rate;
  s.lane_rates = sim.at("lane_rates").get<std::vector<double>>();
  s.horizon = sim.at("horizon").get<double>();
  s.replan_period = sim.at("replan_period").get<double>();
  s.time_step = sim.at("time_step").get<double>();
  s.rng_seed = seed;
  s.min_entry_gap = sim.at("min_entry_gap").get<double>();
  s.validate();
  return s;
}

}  // namespace cdsched
