#pragma once

// Discrete-time intersection simulator. Vehicles arrive by independent
// per-lane Poisson processes, wait in per-lane point queues at the control
// zone boundary, approach the conflict zone at the speed needed to meet their
// scheduled entry time and cross it at constant speed. The passing order of
// every vehicle still approaching is recomputed each replanning period.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cdsched/enumerate.hpp"
#include "cdsched/mcts.hpp"
#include "cdsched/schedule.hpp"

namespace cdsched {

struct ScenarioConfig {
  IntersectionModel model{IntersectionConfig{}};
  SafetyGapTable gaps;
  double arrival_rate = 300.0;     // veh / (lane * h)
  std::vector<double> lane_rates;  // optional per-lane override
  double horizon = 1200.0;
  double replan_period = 2.0;
  double time_step = 0.1;
  std::uint64_t rng_seed = 1;
  KinematicLimits kinematics;
  double min_entry_gap = 10.0;  // metres the predecessor must be downstream

  double rate_of(LaneId lane) const { return lane_rates.empty() ? arrival_rate : lane_rates.at(lane); }

  std::size_t replan_steps() const { return static_cast<std::size_t>(std::llround(replan_period / time_step)); }
  std::size_t total_steps() const { return static_cast<std::size_t>(std::llround(horizon / time_step)); }

  void validate() const {
    gaps.validate();
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!(time_step > 0.0)) throw std::invalid_argument("time_step must be positive");
    if (!(replan_period > 0.0)) throw std::invalid_argument("replan_period must be positive");
    const double ratio = replan_period / time_step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
      throw std::invalid_argument("replan_period must be a multiple of time_step");
    if (!lane_rates.empty() && lane_rates.size() != model.lane_count())
      throw std::invalid_argument("lane_rates must list one rate per lane");
    if (arrival_rate < 0.0) throw std::invalid_argument("arrival rates must be >= 0");
    for (double r : lane_rates)
      if (r < 0.0) throw std::invalid_argument("arrival rates must be >= 0");
    if (!(kinematics.v_max > 0.0) || !(kinematics.a_max > 0.0))
      throw std::invalid_argument("kinematic limits must be positive");
    if (!(min_entry_gap > 0.0)) throw std::invalid_argument("min_entry_gap must be positive");
    // A vehicle admitted right after a replan must not reach the conflict zone unscheduled.
    if (!(model.control_zone_length() > kinematics.v_max * (replan_period + time_step)))
      throw std::invalid_argument("control zone too short for the replanning period");
  }
};

/// Arrival times at the control-zone boundary, one list per lane.
inline std::vector<std::vector<double>> generate_arrivals(const ScenarioConfig& config) {
  std::vector<std::vector<double>> arrivals(config.model.lane_count());
  for (LaneId lane = 0; lane < arrivals.size(); ++lane) {
    const double rate = config.rate_of(lane);
    if (rate <= 0.0) continue;
    std::seed_seq seq{static_cast<std::uint32_t>(config.rng_seed), static_cast<std::uint32_t>(config.rng_seed >> 32),
                      static_cast<std::uint32_t>(lane)};
    std::mt19937_64 rng(seq);
    std::exponential_distribution<double> gap(rate / 3600.0);
    for (double t = gap(rng); t < config.horizon; t += gap(rng)) arrivals[lane].push_back(t);
  }
  return arrivals;
}

enum class StrategyKind : std::uint8_t { Fifo, Mcts, Oracle };

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Fifo: return "fifo";
    case StrategyKind::Mcts: return "mcts";
    case StrategyKind::Oracle: return "oracle";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view name) {
  if (name == "fifo") return StrategyKind::Fifo;
  if (name == "mcts") return StrategyKind::Mcts;
  if (name == "oracle") return StrategyKind::Oracle;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

struct Strategy {
  StrategyKind kind = StrategyKind::Fifo;
  MctsConfig mcts;
  std::uint64_t enumeration_cap = 200'000;
};

struct SimVehicle {
  std::string id;
  LaneId lane = 0;
  Movement movement = Movement::Straight;
  VehicleState state = VehicleState::Queued;
  double spawn_time = 0.0;
  double admit_time = std::numeric_limits<double>::quiet_NaN();  // left the point queue
  double distance = 0.0;
  double speed = 0.0;
  std::optional<double> assigned_entry;
  double planned_t_min = 0.0;
  std::vector<double> planned_arrivals;
  double entry_time = std::numeric_limits<double>::quiet_NaN();
  double exit_time = std::numeric_limits<double>::quiet_NaN();
  double delay = 0.0;
};

struct SimState {
  double clock = 0.0;
  std::size_t step_index = 0;
  std::vector<SimVehicle> vehicles;                   // every vehicle spawned so far
  std::vector<std::deque<std::size_t>> queues;        // point queues, per lane
  std::vector<std::deque<std::size_t>> approaching;   // in the control zone, front first
  std::vector<std::size_t> crossing;
  std::vector<std::size_t> departed;                  // in departure order
  OccupancyState committed;                           // arrivals of vehicles already in the conflict zone
  std::vector<std::size_t> next_arrival;              // per lane cursor into the arrival lists
};

struct ReplanStats {
  std::size_t count = 0;
  std::size_t failures = 0;
  std::vector<std::size_t> nodes;  // nodes expanded per replan (search strategies)
  double min_eta = std::numeric_limits<double>::infinity();
  std::vector<std::string> log;
};

struct Metrics {
  std::string strategy;
  double arrival_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t generated = 0;
  std::size_t throughput = 0;
  double total_delay = 0.0;
  double average_delay = 0.0;
  double eta = 0.0;
  std::size_t replan_count = 0;
  double nodes_mean = 0.0;
  std::size_t nodes_max = 0;
  double min_replan_eta = 0.0;
  std::size_t strategy_failures = 0;
};

class Simulator {
 public:
  Simulator(ScenarioConfig config, Strategy strategy)
      : config_(std::move(config)), strategy_(strategy), arrivals_(generate_arrivals(config_)) {
    config_.validate();
    const std::size_t lanes = config_.model.lane_count();
    state_.queues.assign(lanes, {});
    state_.approaching.assign(lanes, {});
    state_.next_arrival.assign(lanes, 0);
    state_.committed = OccupancyState(config_.model.subzone_count());
  }

  const ScenarioConfig& config() const { return config_; }
  const SimState& state() const { return state_; }
  const ReplanStats& replans() const { return replans_; }
  bool finished() const { return state_.step_index >= config_.total_steps(); }

  void run() {
    while (!finished()) step();
  }

  bool replan_due() const { return state_.step_index % config_.replan_steps() == 0; }

  /// Spawns due arrivals, admits point-queue heads, replans when a replanning
  /// instant is reached, moves every vehicle by one time step and advances the
  /// clock.
  void step() {
    spawn();
    admit();
    if (replan_due()) replan();
    move();
    ++state_.step_index;
    state_.clock = double(state_.step_index) * config_.time_step;
  }

  /// Reschedules every vehicle still approaching the conflict zone.
  void replan() {
    std::vector<std::size_t> ids;
    std::vector<Entrant> entrants;
    for (LaneId lane = 0; lane < state_.approaching.size(); ++lane) {
      std::size_t position = 0;
      for (std::size_t idx : state_.approaching[lane]) {
        const SimVehicle& v = state_.vehicles[idx];
        const double speed = std::min(v.speed, config_.kinematics.v_max);
        entrants.push_back(Entrant{v.id, v.lane, v.movement,
                                   state_.clock + min_arrival_time(v.distance, speed, config_.kinematics),
                                   double(position++)});
        ids.push_back(idx);
      }
    }
    if (entrants.empty()) return;
    ++replans_.count;
    const SchedulingProblem problem(config_.model, config_.gaps, std::move(entrants), state_.committed);

    PassingOrder order;
    try {
      order = plan(problem);
    } catch (const std::exception& e) {
      ++replans_.failures;
      replans_.log.push_back("t=" + std::to_string(state_.clock) + ": " + e.what() + "; keeping previous order");
      order = lane_merge(problem, [&](std::size_t v) {
        const SimVehicle& sv = state_.vehicles[ids[v]];
        const bool fresh = !sv.assigned_entry.has_value();
        return std::tuple<bool, double, const std::string&>(fresh, fresh ? problem.entrant(v).earliest_entry
                                                                         : *sv.assigned_entry,
                                                            sv.id);
      });
    }
    const ScheduleResult schedule = interpret_order(problem, order);
    for (const ScheduledVehicle& s : schedule.entries) {
      SimVehicle& v = state_.vehicles[ids[s.vehicle]];
      v.assigned_entry = s.entry_time;
      v.planned_t_min = s.earliest_entry;
      v.planned_arrivals = s.arrivals;
    }
  }

  Metrics metrics() const {
    Metrics m;
    m.strategy = std::string(to_string(strategy_.kind));
    m.arrival_rate = config_.arrival_rate;
    m.seed = config_.rng_seed;
    m.generated = state_.vehicles.size();
    for (std::size_t idx : state_.departed) {
      const SimVehicle& v = state_.vehicles[idx];
      if (v.exit_time > config_.horizon) continue;
      ++m.throughput;
      m.total_delay += v.delay;
    }
    m.average_delay = m.throughput ? m.total_delay / double(m.throughput) : 0.0;
    m.replan_count = replans_.count;
    if (!replans_.nodes.empty()) {
      std::size_t sum = 0;
      for (std::size_t n : replans_.nodes) {
        sum += n;
        m.nodes_max = std::max(m.nodes_max, n);
      }
      m.nodes_mean = double(sum) / double(replans_.nodes.size());
    }
    m.min_replan_eta = std::isinf(replans_.min_eta) ? 0.0 : replans_.min_eta;
    m.strategy_failures = replans_.failures;
    return m;
  }

  /// generated = queued + approaching + crossing + departed
  bool conserved() const {
    std::size_t n = state_.crossing.size() + state_.departed.size();
    for (const auto& q : state_.queues) n += q.size();
    for (const auto& q : state_.approaching) n += q.size();
    return n == state_.vehicles.size();
  }

 private:
  PassingOrder plan(const SchedulingProblem& problem) {
    switch (strategy_.kind) {
      case StrategyKind::Fifo:
        return fifo_order(problem);
      case StrategyKind::Mcts: {
        MctsConfig cfg = strategy_.mcts;
        cfg.rng_seed = strategy_.mcts.rng_seed + replans_.count;
        cfg.keep_tree = false;
        cfg.record_iterations = false;
        SearchReport report = mcts_search(problem, cfg);
        replans_.nodes.push_back(report.nodes_expanded);
        replans_.min_eta = std::min(replans_.min_eta, improvement_rate(report.fifo_delay, report.best_delay));
        return std::move(report.best_order);
      }
      case StrategyKind::Oracle: {
        EnumerationResult result = enumerate_optimal(problem, {strategy_.enumeration_cap, false});
        replans_.nodes.push_back(result.orders_visited);
        return std::move(result.best_order);
      }
    }
    throw std::logic_error("unknown strategy");
  }

  void spawn() {
    for (LaneId lane = 0; lane < arrivals_.size(); ++lane) {
      auto& cursor = state_.next_arrival[lane];
      while (cursor < arrivals_[lane].size() && arrivals_[lane][cursor] <= state_.clock) {
        SimVehicle v;
        v.id = "v" + std::to_string(state_.vehicles.size());
        v.lane = lane;
        v.movement = config_.model.movement(lane);
        v.spawn_time = arrivals_[lane][cursor];
        state_.queues[lane].push_back(state_.vehicles.size());
        state_.vehicles.push_back(std::move(v));
        ++cursor;
      }
    }
  }

  void admit() {
    const double length = config_.model.control_zone_length();
    for (LaneId lane = 0; lane < state_.queues.size(); ++lane) {
      auto& queue = state_.queues[lane];
      if (queue.empty()) continue;
      SimVehicle& v = state_.vehicles[queue.front()];
      // A vehicle admitted in the step it arrives keeps its free-flow progress.
      const double since = state_.clock - v.spawn_time;
      const double position = since < config_.time_step ? length - config_.kinematics.v_max * since : length;
      const auto& ahead = state_.approaching[lane];
      if (!ahead.empty() && state_.vehicles[ahead.back()].distance > position - config_.min_entry_gap) continue;
      v.state = VehicleState::Approaching;
      v.admit_time = state_.clock;
      v.distance = position;
      v.speed = config_.kinematics.v_max;
      state_.approaching[lane].push_back(queue.front());
      queue.pop_front();
    }
  }

  void move() {
    const double dt = config_.time_step;
    const double v_max = config_.kinematics.v_max;
    const double t = state_.clock;

    for (std::size_t i = 0; i < state_.crossing.size();) {
      SimVehicle& v = state_.vehicles[state_.crossing[i]];
      if (v.exit_time <= t + dt) {
        v.state = VehicleState::Departed;
        state_.departed.push_back(state_.crossing[i]);
        state_.crossing.erase(state_.crossing.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ++i;
      }
    }

    for (LaneId lane = 0; lane < state_.approaching.size(); ++lane) {
      auto& lane_queue = state_.approaching[lane];
      double ahead = -std::numeric_limits<double>::infinity();
      std::size_t reached = 0;
      for (std::size_t pos = 0; pos < lane_queue.size(); ++pos) {
        SimVehicle& v = state_.vehicles[lane_queue[pos]];
        double speed = v_max;
        if (v.assigned_entry) {
          const double remaining = *v.assigned_entry - t;
          if (remaining > 1e-12) speed = std::min(v_max, v.distance / remaining);
        }
        double next = v.distance - speed * dt;
        if (!v.assigned_entry && pos > 0) next = std::max(next, ahead + config_.min_entry_gap);
        if (next <= 0.0) {
          if (!v.assigned_entry) throw std::logic_error("vehicle " + v.id + " reached the conflict zone unscheduled");
          if (pos != reached) throw std::logic_error("vehicle " + v.id + " overtook its lane predecessor");
          enter_conflict_zone(v, t + v.distance / speed);
          ++reached;
          ahead = 0.0;
          continue;
        }
        v.speed = std::min(v_max, (v.distance - next) / dt);
        v.distance = next;
        ahead = next;
      }
      lane_queue.erase(lane_queue.begin(), lane_queue.begin() + static_cast<std::ptrdiff_t>(reached));
    }
  }

  void enter_conflict_zone(SimVehicle& v, double entry) {
    if (entry < v.planned_t_min - 1e-6)
      throw std::logic_error("vehicle " + v.id + " would arrive before its minimum arrival time");
    const Route& route = config_.model.route(v.lane);
    v.state = VehicleState::Crossing;
    v.entry_time = entry;
    v.exit_time = entry + route.clear_offset;
    v.delay = entry - (v.spawn_time + config_.model.control_zone_length() / config_.kinematics.v_max);
    v.distance = 0.0;
    for (std::size_t k = 0; k < route.size(); ++k)
      state_.committed.record(route.subzones[k], entry + route.offsets[k], v.movement);
    state_.crossing.push_back(static_cast<std::size_t>(&v - state_.vehicles.data()));
  }

  ScenarioConfig config_;
  Strategy strategy_;
  std::vector<std::vector<double>> arrivals_;
  SimState state_;
  ReplanStats replans_;
};

/// Realized arrival of a vehicle at each subzone of its route.
inline std::vector<double> realized_arrivals(const IntersectionModel& model, const SimVehicle& v) {
  std::vector<double> out;
  if (std::isnan(v.entry_time)) return out;
  for (double offset : model.route(v.lane).offsets) out.push_back(v.entry_time + offset);
  return out;
}

/// Headway and lane-order violations among vehicles that entered the conflict
/// zone. Headways may undercut the gap by at most `tolerance` seconds.
inline std::vector<std::string> check_safety(const ScenarioConfig& config, const SimState& state, double tolerance) {
  struct Use {
    double time;
    Movement movement;
    std::size_t vehicle;
  };
  std::vector<std::string> violations;
  std::vector<std::vector<Use>> uses(config.model.subzone_count());
  std::vector<std::vector<std::size_t>> lane_entries(config.model.lane_count());
  for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
    const SimVehicle& v = state.vehicles[i];
    if (std::isnan(v.entry_time)) continue;
    const Route& route = config.model.route(v.lane);
    for (std::size_t k = 0; k < route.size(); ++k) uses[route.subzones[k]].push_back({v.entry_time + route.offsets[k], v.movement, i});
    lane_entries[v.lane].push_back(i);
  }
  for (SubzoneId z = 0; z < uses.size(); ++z) {
    auto& u = uses[z];
    std::sort(u.begin(), u.end(), [](const Use& a, const Use& b) { return a.time < b.time; });
    for (std::size_t k = 1; k < u.size(); ++k)
      if (u[k].time - u[k - 1].time < config.gaps[u[k - 1].movement] - tolerance)
        violations.push_back("subzone " + std::to_string(z) + ": " + state.vehicles[u[k - 1].vehicle].id + " -> " +
                             state.vehicles[u[k].vehicle].id + " headway " + std::to_string(u[k].time - u[k - 1].time));
  }
  // Vehicles are spawned in lane order, so entry times must follow spawn order.
  for (const auto& entries : lane_entries)
    for (std::size_t k = 1; k < entries.size(); ++k)
      if (!(state.vehicles[entries[k]].entry_time > state.vehicles[entries[k - 1]].entry_time))
        violations.push_back("lane order broken by " + state.vehicles[entries[k]].id);
  return violations;
}

inline Metrics run_simulation(const ScenarioConfig& config, const Strategy& strategy) {
  Simulator sim(config, strategy);
  sim.run();
  return sim.metrics();
}

/// Runs the strategy and, unless it is FIFO itself, a FIFO run on the same
/// arrival stream; eta compares their average delays.
inline Metrics run_experiment(const ScenarioConfig& config, const Strategy& strategy) {
  Metrics m = run_simulation(config, strategy);
  if (strategy.kind != StrategyKind::Fifo) {
    const Metrics fifo = run_simulation(config, Strategy{StrategyKind::Fifo, {}, 0});
    m.eta = improvement_rate(fifo.average_delay, m.average_delay);
  }
  return m;
}

}  // namespace cdsched
