#pragma once

// Passing-order interpretation: turns a (partial) passing order into
// per-subzone arrival times and the total entry delay of the covered vehicles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdsched/model.hpp"

namespace cdsched {

inline constexpr double kUnoccupied = -std::numeric_limits<double>::infinity();

class InvalidOrder : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KinematicLimits {
  double v_max = 15.0;
  double a_max = 3.0;
};

/// Earliest time to cover `distance` starting at `speed`, accelerating at
/// a_max until v_max is reached and cruising afterwards.
inline double min_arrival_time(double distance, double speed, KinematicLimits limits) {
  if (distance < 0.0) throw std::invalid_argument("min_arrival_time: negative distance");
  if (!(limits.v_max > 0.0) || !(limits.a_max > 0.0))
    throw std::invalid_argument("min_arrival_time: limits must be positive");
  if (speed < 0.0 || speed > limits.v_max)
    throw std::invalid_argument("min_arrival_time: speed outside [0, v_max]");
  if (speed == limits.v_max) return distance / limits.v_max;
  const double ramp_time = (limits.v_max - speed) / limits.a_max;
  const double ramp_distance = 0.5 * (speed + limits.v_max) * ramp_time;
  if (distance <= ramp_distance)
    return (std::sqrt(speed * speed + 2.0 * limits.a_max * distance) - speed) / limits.a_max;
  return ramp_time + (distance - ramp_distance) / limits.v_max;
}

/// Latest scheduled arrival per subzone and the movement of the vehicle that
/// made it. Grows monotonically as vehicles are appended.
struct OccupancyState {
  std::vector<double> t_max;
  std::vector<Movement> last_movement;

  OccupancyState() = default;
  explicit OccupancyState(std::size_t subzones)
      : t_max(subzones, kUnoccupied), last_movement(subzones, Movement::Straight) {}

  bool occupied(SubzoneId z) const { return t_max[z] != kUnoccupied; }

  /// Records an arrival; earlier-than-latest arrivals leave the state as is.
  void record(SubzoneId z, double arrival, Movement m) {
    if (arrival >= t_max[z]) {
      t_max[z] = arrival;
      last_movement[z] = m;
    }
  }

  friend bool operator==(const OccupancyState&, const OccupancyState&) = default;
};

/// A vehicle as seen by the scheduler.
struct Entrant {
  std::string id;
  LaneId lane = 0;
  Movement movement = Movement::Straight;
  double earliest_entry = 0.0;  // t_min at the first subzone of the route
  double distance = 0.0;        // orders vehicles within a lane
};

/// Immutable scheduling instance: entrants, their lane queues, the gap table
/// and the occupancy left by vehicles already committed to the conflict zone.
/// Holds a pointer to the model, which must outlive the problem.
class SchedulingProblem {
 public:
  SchedulingProblem(const IntersectionModel& model, SafetyGapTable gaps, std::vector<Entrant> entrants,
                    OccupancyState seed = {})
      : model_(&model), gaps_(gaps), entrants_(std::move(entrants)), seed_(std::move(seed)) {
    gaps_.validate();
    if (seed_.t_max.empty()) seed_ = OccupancyState(model.subzone_count());
    if (seed_.t_max.size() != model.subzone_count())
      throw std::invalid_argument("seed occupancy does not match the subzone count");
    lanes_.assign(model.lane_count(), {});
    rank_.assign(entrants_.size(), 0);
    for (std::size_t i = 0; i < entrants_.size(); ++i) {
      const Entrant& e = entrants_[i];
      if (!model.has_lane(e.lane)) throw std::invalid_argument("entrant '" + e.id + "' on unknown lane");
      if (model.movement(e.lane) != e.movement)
        throw std::invalid_argument("entrant '" + e.id + "' movement does not match its lane");
      lanes_[e.lane].push_back(i);
    }
    for (auto& queue : lanes_) {
      std::sort(queue.begin(), queue.end(), [&](std::size_t a, std::size_t b) {
        return entrants_[a].distance < entrants_[b].distance;
      });
      for (std::size_t k = 0; k < queue.size(); ++k) {
        if (k > 0 && entrants_[queue[k]].distance == entrants_[queue[k - 1]].distance)
          throw std::invalid_argument("entrants '" + entrants_[queue[k - 1]].id + "' and '" +
                                      entrants_[queue[k]].id + "' tie on lane position");
        rank_[queue[k]] = k;
      }
    }
  }

  /// Builds entrants from vehicle states; t_min is measured from `now`.
  static SchedulingProblem from_vehicles(const IntersectionModel& model, SafetyGapTable gaps,
                                         std::span<const Vehicle> vehicles, double now = 0.0,
                                         OccupancyState seed = {}) {
    std::vector<Entrant> entrants;
    entrants.reserve(vehicles.size());
    for (const Vehicle& v : vehicles) {
      const double t = now + min_arrival_time(v.distance_to_zone, v.speed, {v.v_max, v.a_max});
      entrants.push_back(Entrant{v.id, v.lane, v.movement, t, v.distance_to_zone});
    }
    return SchedulingProblem(model, gaps, std::move(entrants), std::move(seed));
  }

  const IntersectionModel& model() const { return *model_; }
  const SafetyGapTable& gaps() const { return gaps_; }
  const OccupancyState& seed() const { return seed_; }
  std::size_t size() const { return entrants_.size(); }
  bool empty() const { return entrants_.empty(); }
  const Entrant& entrant(std::size_t i) const { return entrants_[i]; }
  std::span<const Entrant> entrants() const { return entrants_; }
  const Route& route(std::size_t i) const { return model_->route(entrants_[i].lane); }
  /// Vehicles of a lane, nearest to the conflict zone first.
  std::span<const std::size_t> lane_queue(LaneId lane) const { return lanes_[lane]; }
  std::size_t lane_rank(std::size_t i) const { return rank_[i]; }

 private:
  const IntersectionModel* model_;
  SafetyGapTable gaps_;
  std::vector<Entrant> entrants_;
  OccupancyState seed_;
  std::vector<std::vector<std::size_t>> lanes_;
  std::vector<std::size_t> rank_;
};

using PassingOrder = std::vector<std::size_t>;

/// Incremental form of the interpretation recurrence. Appending a vehicle
/// fixes its entry time from the current occupancy; undo() restores the state
/// before the last append.
class OrderEvaluator {
 public:
  explicit OrderEvaluator(const SchedulingProblem& problem)
      : problem_(&problem), occupancy_(problem.seed()), lane_next_(problem.model().lane_count(), 0) {
    order_.reserve(problem.size());
  }

  const SchedulingProblem& problem() const { return *problem_; }
  const PassingOrder& order() const { return order_; }
  std::size_t depth() const { return order_.size(); }
  bool complete() const { return order_.size() == problem_->size(); }
  double total_delay() const { return total_delay_; }
  const OccupancyState& occupancy() const { return occupancy_; }

  bool can_append(std::size_t vehicle) const {
    return vehicle < problem_->size() &&
           lane_next_[problem_->entrant(vehicle).lane] == problem_->lane_rank(vehicle);
  }

  /// Entry time the vehicle would receive if appended now.
  double entry_time_if_appended(std::size_t vehicle) const {
    const Route& route = problem_->route(vehicle);
    double entry = problem_->entrant(vehicle).earliest_entry;
    for (std::size_t k = 0; k < route.size(); ++k) {
      const SubzoneId z = route.subzones[k];
      entry = std::max(entry, occupancy_.t_max[z] + problem_->gaps()[occupancy_.last_movement[z]] - route.offsets[k]);
    }
    return entry;
  }

  /// Front-most uncovered vehicle of a lane, or problem().size() when the lane is done.
  std::size_t next_in_lane(LaneId lane) const {
    const auto queue = problem_->lane_queue(lane);
    return lane_next_[lane] < queue.size() ? queue[lane_next_[lane]] : problem_->size();
  }

  /// Front-most uncovered vehicle of every non-empty lane.
  void candidates(std::vector<std::size_t>& out) const {
    out.clear();
    for (LaneId lane = 0; lane < lane_next_.size(); ++lane) {
      const auto queue = problem_->lane_queue(lane);
      if (lane_next_[lane] < queue.size()) out.push_back(queue[lane_next_[lane]]);
    }
  }

  double append(std::size_t vehicle) {
    if (vehicle >= problem_->size()) throw InvalidOrder("passing order references unknown vehicle");
    if (!can_append(vehicle))
      throw InvalidOrder("invalid passing order: '" + problem_->entrant(vehicle).id +
                         "' breaks lane order or repeats");
    const double entry = entry_time_if_appended(vehicle);
    const Entrant& e = problem_->entrant(vehicle);
    const Route& route = problem_->route(vehicle);
    if (track_undo_) {
      for (SubzoneId z : route.subzones) undo_log_.push_back({z, occupancy_.t_max[z], occupancy_.last_movement[z]});
      delay_log_.push_back(total_delay_);
    }
    for (std::size_t k = 0; k < route.size(); ++k) {
      const SubzoneId z = route.subzones[k];
      occupancy_.t_max[z] = entry + route.offsets[k];
      occupancy_.last_movement[z] = e.movement;
    }
    total_delay_ += entry - e.earliest_entry;
    ++lane_next_[e.lane];
    order_.push_back(vehicle);
    return entry;
  }

  void undo() {
    if (order_.empty()) throw std::logic_error("undo on empty order");
    const std::size_t vehicle = order_.back();
    order_.pop_back();
    --lane_next_[problem_->entrant(vehicle).lane];
    for (std::size_t k = problem_->route(vehicle).size(); k > 0; --k) {
      const UndoEntry& u = undo_log_.back();
      occupancy_.t_max[u.subzone] = u.t_max;
      occupancy_.last_movement[u.subzone] = u.movement;
      undo_log_.pop_back();
    }
    total_delay_ = delay_log_.back();
    delay_log_.pop_back();
  }

  /// Rollouts never undo; turning tracking off avoids the log traffic.
  void set_undo_tracking(bool on) { track_undo_ = on; }

  /// Copy of the current state without undo history.
  OrderEvaluator detached() const {
    OrderEvaluator copy(*problem_, occupancy_, lane_next_, order_, total_delay_);
    copy.order_.reserve(problem_->size());
    copy.track_undo_ = false;
    return copy;
  }

 private:
  struct UndoEntry {
    SubzoneId subzone;
    double t_max;
    Movement movement;
  };

  OrderEvaluator(const SchedulingProblem& problem, OccupancyState occupancy, std::vector<std::size_t> lane_next,
                 PassingOrder order, double total_delay)
      : problem_(&problem),
        occupancy_(std::move(occupancy)),
        lane_next_(std::move(lane_next)),
        order_(std::move(order)),
        total_delay_(total_delay) {}

  const SchedulingProblem* problem_;
  OccupancyState occupancy_;
  std::vector<std::size_t> lane_next_;
  PassingOrder order_;
  double total_delay_ = 0.0;
  bool track_undo_ = true;
  std::vector<UndoEntry> undo_log_;
  std::vector<double> delay_log_;
};

struct ScheduledVehicle {
  std::size_t vehicle = 0;
  double earliest_entry = 0.0;
  double entry_time = 0.0;
  double delay = 0.0;
  std::vector<double> arrivals;  // one per route subzone
};

struct ScheduleResult {
  std::vector<ScheduledVehicle> entries;  // in passing order
  double total_delay = 0.0;

  /// Scheduled arrival of a vehicle at a subzone of its route.
  double assign(const SchedulingProblem& problem, std::size_t vehicle, SubzoneId z) const {
    for (const auto& e : entries) {
      if (e.vehicle != vehicle) continue;
      const Route& r = problem.route(vehicle);
      for (std::size_t k = 0; k < r.size(); ++k)
        if (r.subzones[k] == z) return e.arrivals[k];
      throw std::out_of_range("subzone not on the vehicle's route");
    }
    throw std::out_of_range("vehicle not scheduled");
  }
};

inline ScheduleResult interpret_order(const SchedulingProblem& problem, std::span<const std::size_t> order) {
  OrderEvaluator evaluator(problem);
  evaluator.set_undo_tracking(false);
  ScheduleResult result;
  result.entries.reserve(order.size());
  for (std::size_t vehicle : order) {
    const double entry = evaluator.append(vehicle);
    const Route& route = problem.route(vehicle);
    ScheduledVehicle s{vehicle, problem.entrant(vehicle).earliest_entry, entry,
                       entry - problem.entrant(vehicle).earliest_entry, {}};
    s.arrivals.reserve(route.size());
    for (double offset : route.offsets) s.arrivals.push_back(entry + offset);
    result.entries.push_back(std::move(s));
  }
  result.total_delay = evaluator.total_delay();
  return result;
}

inline double total_delay(const ScheduleResult& schedule) {
  double sum = 0.0;
  for (const auto& e : schedule.entries) sum += e.delay;
  return sum;
}

/// Relative delay reduction against the FIFO baseline; 0 for a zero baseline.
inline double improvement_rate(double j_fifo, double j_alg) {
  if (j_fifo < 0.0 || j_alg < 0.0) throw std::invalid_argument("improvement_rate: negative delay");
  if (j_fifo == 0.0) return 0.0;
  return (j_fifo - j_alg) / j_fifo;
}

}  // namespace cdsched
