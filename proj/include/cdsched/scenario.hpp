#pragma once

// Random static snapshots of the control zone, used by the search commands,
// parameter sweeps and tests.

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdsched/model.hpp"

namespace cdsched {

struct SnapshotSpec {
  std::size_t vehicles = 30;
  // When non-empty, exact vehicle count per lane (overrides `vehicles`).
  std::vector<std::size_t> per_lane;
  double min_spacing = 8.0;     // metres between same-lane vehicles
  double mean_extra_gap = 25.0;  // mean of the exponential spacing added on top
  double speed_min_fraction = 0.6;
  double v_max = 15.0;
  double a_max = 3.0;
  std::uint64_t seed = 1;
};

/// Vehicles are spread over lanes uniformly (or per `per_lane`); within a
/// lane the distances follow a shifted exponential spacing.
inline std::vector<Vehicle> random_snapshot(const IntersectionModel& model, const SnapshotSpec& spec) {
  if (!spec.per_lane.empty() && spec.per_lane.size() != model.lane_count())
    throw std::invalid_argument("per_lane must list one count per lane");
  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> counts = spec.per_lane;
  if (counts.empty()) {
    counts.assign(model.lane_count(), 0);
    std::uniform_int_distribution<std::size_t> lane_pick(0, model.lane_count() - 1);
    for (std::size_t i = 0; i < spec.vehicles; ++i) ++counts[lane_pick(rng)];
  }
  std::exponential_distribution<double> extra(1.0 / spec.mean_extra_gap);
  std::uniform_real_distribution<double> speed(spec.speed_min_fraction * spec.v_max, spec.v_max);
  std::vector<Vehicle> vehicles;
  for (LaneId lane = 0; lane < model.lane_count(); ++lane) {
    double distance = extra(rng);
    for (std::size_t k = 0; k < counts[lane]; ++k) {
      if (k > 0) distance += spec.min_spacing + extra(rng);
      Vehicle v;
      v.id = "v" + std::to_string(vehicles.size());
      v.lane = lane;
      v.movement = model.movement(lane);
      v.distance_to_zone = distance;
      v.speed = speed(rng);
      v.v_max = spec.v_max;
      v.a_max = spec.a_max;
      vehicles.push_back(std::move(v));
    }
  }
  return vehicles;
}

}  // namespace cdsched
