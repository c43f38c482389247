#pragma once

// Fixtures and reference implementations shared by the test suites. The
// reference scheduler below works from pairwise headway constraints and
// never touches OrderEvaluator, so it can serve as an oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdsched/model.hpp"
#include "cdsched/scenario.hpp"
#include "cdsched/schedule.hpp"

namespace cdsched::testing {

inline IntersectionModel one_lane_model() {
  IntersectionConfig c;
  c.lanes_per_leg = 1;
  return build_intersection(c);
}

inline IntersectionModel three_lane_model() { return build_intersection(IntersectionConfig{}); }

/// One-lane model whose four lanes all cross the single subzone 0.
inline IntersectionModel shared_cell_model() {
  IntersectionConfig c;
  c.lanes_per_leg = 1;
  for (LaneId lane = 0; lane < 4; ++lane) c.routes[lane] = RouteOverride{{0}, {0.0}, 0.3};
  return build_intersection(c);
}

inline Entrant entrant(std::string id, LaneId lane, double t_min, double distance,
                       Movement m = Movement::Straight) {
  return Entrant{std::move(id), lane, m, t_min, distance};
}

/// Random snapshot of `vehicles` vehicles; per-lane counts when given.
inline std::vector<Vehicle> snapshot(const IntersectionModel& model, std::size_t vehicles, std::uint64_t seed,
                                     std::vector<std::size_t> per_lane = {}) {
  SnapshotSpec spec;
  spec.vehicles = vehicles;
  spec.per_lane = std::move(per_lane);
  spec.seed = seed;
  return random_snapshot(model, spec);
}

inline SchedulingProblem problem_from(const IntersectionModel& model, const std::vector<Vehicle>& vehicles) {
  return SchedulingProblem::from_vehicles(model, SafetyGapTable{}, vehicles);
}

struct ReferenceUse {
  SubzoneId subzone;
  double time;
  Movement movement;
};

struct ReferenceSchedule {
  std::vector<double> entry;  // indexed like the order
  double delay = 0.0;
};

/// True when entering at `t` respects every earlier use of the route's subzones.
inline bool reference_feasible(const Route& route, double t, const std::vector<ReferenceUse>& uses,
                               const SafetyGapTable& gaps) {
  for (std::size_t k = 0; k < route.subzones.size(); ++k)
    for (const ReferenceUse& u : uses)
      if (u.subzone == route.subzones[k] && t + route.offsets[k] < u.time + gaps[u.movement] - 1e-12) return false;
  return true;
}

/// Schedules `order` by picking, for each vehicle, the smallest feasible
/// entry among t_min and every headway boundary induced by earlier uses.
/// Returns nullopt when the order breaks lane order.
inline std::optional<ReferenceSchedule> reference_schedule(const SchedulingProblem& problem,
                                                           const std::vector<std::size_t>& order) {
  std::vector<ReferenceUse> uses;
  std::map<LaneId, double> lane_distance;
  ReferenceSchedule out;
  for (std::size_t v : order) {
    const Entrant& e = problem.entrant(v);
    auto seen = lane_distance.find(e.lane);
    if (seen != lane_distance.end() && seen->second > e.distance) return std::nullopt;
    lane_distance[e.lane] = e.distance;
    const Route& route = problem.route(v);
    std::vector<double> candidates{e.earliest_entry};
    for (std::size_t k = 0; k < route.subzones.size(); ++k)
      for (const ReferenceUse& u : uses)
        if (u.subzone == route.subzones[k]) candidates.push_back(u.time + problem.gaps()[u.movement] - route.offsets[k]);
    double best = std::numeric_limits<double>::infinity();
    for (double t : candidates)
      if (t >= e.earliest_entry && t < best && reference_feasible(route, t, uses, problem.gaps())) best = t;
    for (std::size_t k = 0; k < route.subzones.size(); ++k) uses.push_back({route.subzones[k], best + route.offsets[k], e.movement});
    out.entry.push_back(best);
    out.delay += best - e.earliest_entry;
  }
  return out;
}

/// Minimum delay over every permutation that respects lane order.
inline double reference_optimum(const SchedulingProblem& problem, std::uint64_t* valid_orders = nullptr) {
  std::vector<std::size_t> order(problem.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t count = 0;
  do {
    if (auto s = reference_schedule(problem, order)) {
      ++count;
      best = std::min(best, s->delay);
    }
  } while (std::next_permutation(order.begin(), order.end()));
  if (valid_orders) *valid_orders = count;
  return best;
}

}  // namespace cdsched::testing
