#pragma once

// Intersection geometry: legs, lanes, movements, the conflict-subzone grid and
// the per-lane route table (ordered subzones with crossing-time offsets).
//
// The conflict zone is modelled as a square split into an N x N grid of
// lane-width cells, N = 2 * lanes_per_leg. Cells are numbered row-major from
// the south-west corner: id = row * N + col. Legs are numbered counter-
// clockwise starting from the south approach (0 = S, 1 = E, 2 = N, 3 = W) and
// lane k of a leg is the k-th incoming lane counted from the centre line.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cdsched {

using LaneId = std::size_t;
using SubzoneId = std::size_t;

enum class Movement : std::uint8_t { Left = 0, Straight = 1, Right = 2 };

inline constexpr std::size_t kMovementCount = 3;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string_view to_string(Movement m) {
  switch (m) {
    case Movement::Left: return "left";
    case Movement::Straight: return "straight";
    case Movement::Right: return "right";
  }
  return "?";
}

inline Movement parse_movement(std::string_view name) {
  if (name == "left") return Movement::Left;
  if (name == "straight") return Movement::Straight;
  if (name == "right") return Movement::Right;
  throw ModelError("unknown movement '" + std::string(name) + "'");
}

struct Route {
  std::vector<SubzoneId> subzones;
  std::vector<double> offsets;  // seconds after entering the first subzone
  double clear_offset = 0.0;    // seconds after entry until the last subzone is left

  std::size_t size() const { return subzones.size(); }
  bool contains(SubzoneId z) const {
    return std::find(subzones.begin(), subzones.end(), z) != subzones.end();
  }

  friend bool operator==(const Route&, const Route&) = default;
};

/// Minimum headway between consecutive users of one subzone, keyed by the
/// movement of the vehicle that used it first.
struct SafetyGapTable {
  std::array<double, kMovementCount> gap{2.0, 1.5, 1.5};  // left, straight, right

  double operator[](Movement m) const { return gap[static_cast<std::size_t>(m)]; }
  double& operator[](Movement m) { return gap[static_cast<std::size_t>(m)]; }

  void validate() const {
    for (double g : gap)
      if (!(g > 0.0)) throw ModelError("safety gaps must be positive");
  }
};

struct RouteOverride {
  std::vector<SubzoneId> subzones;
  std::vector<double> offsets;
  std::optional<double> clear_offset;
};

struct IntersectionConfig {
  std::size_t lanes_per_leg = 3;
  // Either one entry per lane of a leg (repeated on all four legs) or one
  // entry per lane id. Empty selects the default pattern.
  std::vector<std::string> lane_movements;
  double lane_width = 3.5;
  double control_zone_length = 300.0;
  double straight_speed = 12.0;
  double left_speed = 8.0;
  double right_speed = 6.0;
  // Only consulted together with route overrides.
  std::optional<std::size_t> subzone_count;
  std::map<LaneId, RouteOverride> routes;
};

class IntersectionModel {
 public:
  static constexpr std::size_t kLegs = 4;

  explicit IntersectionModel(const IntersectionConfig& config);

  std::size_t legs() const { return kLegs; }
  std::size_t lanes_per_leg() const { return lanes_per_leg_; }
  std::size_t lane_count() const { return lane_movement_.size(); }
  std::size_t grid_size() const { return grid_; }
  std::size_t subzone_count() const { return subzone_count_; }
  double lane_width() const { return lane_width_; }
  double control_zone_length() const { return control_zone_length_; }
  double crossing_speed(Movement m) const { return crossing_speed_[static_cast<std::size_t>(m)]; }

  bool has_lane(LaneId lane) const { return lane < lane_count(); }
  Movement movement(LaneId lane) const { return lane_movement_.at(lane); }
  const Route& route(LaneId lane) const { return routes_.at(lane); }
  std::size_t leg_of(LaneId lane) const { return lane / lanes_per_leg_; }

  /// True when the two lanes' routes share at least one subzone.
  bool conflicts(LaneId a, LaneId b) const { return conflict_[a * lane_count() + b] != 0; }

  std::string lane_label(LaneId lane) const {
    static constexpr std::array<char, kLegs> names{'S', 'E', 'N', 'W'};
    return std::string(1, names[leg_of(lane)]) + std::to_string(lane % lanes_per_leg_);
  }

  friend bool operator==(const IntersectionModel&, const IntersectionModel&) = default;

 private:
  void build_default_routes();
  void apply_overrides(const IntersectionConfig& config);
  void finalize();

  std::size_t lanes_per_leg_;
  std::size_t grid_;
  std::size_t subzone_count_;
  double lane_width_;
  double control_zone_length_;
  std::array<double, kMovementCount> crossing_speed_;
  std::vector<Movement> lane_movement_;
  std::vector<Route> routes_;
  std::vector<std::uint8_t> conflict_;
};

namespace detail {

struct Cell {
  std::size_t col;
  std::size_t row;
};

// Quarter turn counter-clockwise about the grid centre.
inline Cell rotate(Cell c, std::size_t n, std::size_t turns) {
  for (std::size_t t = 0; t < turns % 4; ++t) c = Cell{n - 1 - c.row, c.col};
  return c;
}

// Cells entered by a left turn in the canonical (south approach) frame: a
// quarter circle centred on the south-west corner, in cell units, together
// with the arc length (cell units) at which each cell is entered.
inline std::vector<std::pair<Cell, double>> left_turn_cells(double radius) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  std::vector<double> angles{0.0};
  for (int m = 1; m < radius; ++m) {
    angles.push_back(std::acos(m / radius));  // crosses x = m
    angles.push_back(std::asin(m / radius));  // crosses y = m
  }
  std::sort(angles.begin(), angles.end());
  angles.erase(std::unique(angles.begin(), angles.end()), angles.end());
  angles.push_back(half_pi);

  std::vector<std::pair<Cell, double>> cells;
  for (std::size_t i = 0; i + 1 < angles.size(); ++i) {
    const double mid = 0.5 * (angles[i] + angles[i + 1]);
    const Cell cell{static_cast<std::size_t>(std::floor(radius * std::cos(mid))),
                    static_cast<std::size_t>(std::floor(radius * std::sin(mid)))};
    if (!cells.empty() && cells.back().first.col == cell.col && cells.back().first.row == cell.row)
      continue;
    cells.emplace_back(cell, radius * angles[i]);
  }
  return cells;
}

}  // namespace detail

inline IntersectionModel::IntersectionModel(const IntersectionConfig& config)
    : lanes_per_leg_(config.lanes_per_leg),
      grid_(2 * config.lanes_per_leg),
      subzone_count_(grid_ * grid_),
      lane_width_(config.lane_width),
      control_zone_length_(config.control_zone_length),
      crossing_speed_{config.left_speed, config.straight_speed, config.right_speed} {
  if (lanes_per_leg_ != 1 && lanes_per_leg_ != 3)
    throw ModelError("lanes_per_leg must be 1 or 3");
  for (double v : crossing_speed_)
    if (!(v > 0.0)) throw ModelError("crossing speeds must be positive");
  if (!(lane_width_ > 0.0)) throw ModelError("lane width must be positive");
  if (!(control_zone_length_ > 0.0)) throw ModelError("control zone length must be positive");

  const std::size_t lanes = kLegs * lanes_per_leg_;
  std::vector<std::string> names = config.lane_movements;
  if (names.empty()) {
    names = lanes_per_leg_ == 3 ? std::vector<std::string>{"left", "straight", "right"}
                                : std::vector<std::string>{"straight"};
  }
  if (names.size() == lanes_per_leg_) {
    std::vector<std::string> expanded;
    for (std::size_t leg = 0; leg < kLegs; ++leg) expanded.insert(expanded.end(), names.begin(), names.end());
    names = std::move(expanded);
  }
  if (names.size() != lanes)
    throw ModelError("lane_movements must name a movement for every lane (" + std::to_string(lanes) +
                     " lanes, got " + std::to_string(names.size()) + ")");
  for (const auto& name : names) lane_movement_.push_back(parse_movement(name));

  build_default_routes();
  apply_overrides(config);
  finalize();
}

inline void IntersectionModel::build_default_routes() {
  const std::size_t n = grid_;
  const std::size_t half = lanes_per_leg_;
  routes_.assign(lane_count(), Route{});
  for (LaneId lane = 0; lane < lane_count(); ++lane) {
    const std::size_t leg = leg_of(lane);
    const std::size_t k = lane % lanes_per_leg_;
    const Movement m = lane_movement_[lane];
    const double cell_time = lane_width_ / crossing_speed(m);
    std::vector<std::pair<detail::Cell, double>> path;  // cell, entry distance in cells
    double length = 0.0;
    switch (m) {
      case Movement::Straight:
        for (std::size_t r = 0; r < n; ++r) path.emplace_back(detail::Cell{half + k, r}, double(r));
        length = double(n);
        break;
      case Movement::Right:
        for (std::size_t c = half + k; c < n; ++c)
          path.emplace_back(detail::Cell{c, 0}, double(c - half - k));
        length = double(n - half - k);
        break;
      case Movement::Left: {
        const double radius = double(half + k) + 0.5;
        path = detail::left_turn_cells(radius);
        length = radius * std::numbers::pi / 2.0;
        break;
      }
    }
    Route& route = routes_[lane];
    for (const auto& [cell, distance] : path) {
      const detail::Cell c = detail::rotate(cell, n, leg);
      route.subzones.push_back(c.row * n + c.col);
      route.offsets.push_back(distance * cell_time);
    }
    route.clear_offset = length * cell_time;
  }
}

inline void IntersectionModel::apply_overrides(const IntersectionConfig& config) {
  if (config.routes.empty()) return;
  if (config.subzone_count) subzone_count_ = *config.subzone_count;
  for (const auto& [lane, o] : config.routes) {
    if (!has_lane(lane)) throw ModelError("route override for unknown lane " + std::to_string(lane));
    Route route;
    route.subzones = o.subzones;
    route.offsets = o.offsets;
    const double last = o.offsets.empty() ? 0.0 : o.offsets.back();
    route.clear_offset = o.clear_offset.value_or(last + lane_width_ / crossing_speed(lane_movement_[lane]));
    routes_[lane] = std::move(route);
  }
}

inline void IntersectionModel::finalize() {
  for (LaneId lane = 0; lane < lane_count(); ++lane) {
    const Route& r = routes_[lane];
    const std::string where = "route of lane " + std::to_string(lane);
    if (r.subzones.empty()) throw ModelError(where + " is empty");
    if (r.offsets.size() != r.subzones.size()) throw ModelError(where + ": offsets/subzones length mismatch");
    if (r.offsets.front() != 0.0) throw ModelError(where + ": first offset must be 0");
    for (std::size_t i = 1; i < r.offsets.size(); ++i)
      if (!(r.offsets[i] > r.offsets[i - 1])) throw ModelError(where + ": offsets must strictly increase");
    if (!(r.clear_offset >= r.offsets.back())) throw ModelError(where + ": clear offset precedes last subzone");
    std::set<SubzoneId> seen;
    for (SubzoneId z : r.subzones) {
      if (z >= subzone_count_)
        throw ModelError(where + " references nonexistent subzone " + std::to_string(z));
      if (!seen.insert(z).second) throw ModelError(where + " visits subzone " + std::to_string(z) + " twice");
    }
  }
  const std::size_t lanes = lane_count();
  conflict_.assign(lanes * lanes, 0);
  for (LaneId a = 0; a < lanes; ++a)
    for (LaneId b = 0; b < lanes; ++b)
      conflict_[a * lanes + b] = std::any_of(routes_[a].subzones.begin(), routes_[a].subzones.end(),
                                             [&](SubzoneId z) { return routes_[b].contains(z); });
}

inline IntersectionModel build_intersection(const IntersectionConfig& config) {
  return IntersectionModel(config);
}

inline const Route& route_for(const IntersectionModel& model, LaneId lane) {
  if (!model.has_lane(lane)) throw ModelError("unknown lane " + std::to_string(lane));
  return model.route(lane);
}

enum class VehicleState : std::uint8_t { Queued, Approaching, Crossing, Departed };

struct Vehicle {
  std::string id;
  LaneId lane = 0;
  Movement movement = Movement::Straight;
  double distance_to_zone = 0.0;  // metres to the first subzone
  double speed = 0.0;
  double v_max = 15.0;
  double a_max = 3.0;
  VehicleState state = VehicleState::Approaching;
};

/// Reports every inconsistency between a vehicle set and the model. An empty
/// result means the scenario is usable.
inline std::vector<std::string> validate_scenario(const IntersectionModel& model,
                                                  const std::vector<Vehicle>& vehicles) {
  std::vector<std::string> violations;
  std::set<std::string> ids;
  std::map<LaneId, std::vector<double>> lane_distances;
  for (const Vehicle& v : vehicles) {
    if (!ids.insert(v.id).second) violations.push_back("duplicate id '" + v.id + "'");
    if (!model.has_lane(v.lane)) {
      violations.push_back("vehicle '" + v.id + "' on unknown lane " + std::to_string(v.lane));
      continue;
    }
    if (model.movement(v.lane) != v.movement)
      violations.push_back("vehicle '" + v.id + "' declares " + std::string(to_string(v.movement)) +
                           " on a " + std::string(to_string(model.movement(v.lane))) + " lane");
    if (v.distance_to_zone < 0.0) violations.push_back("vehicle '" + v.id + "' has negative distance");
    if (!(v.v_max > 0.0) || !(v.a_max > 0.0))
      violations.push_back("vehicle '" + v.id + "' has non-positive kinematic limits");
    if (v.speed < 0.0 || v.speed > v.v_max) violations.push_back("vehicle '" + v.id + "' speed outside [0, v_max]");
    auto& distances = lane_distances[v.lane];
    if (std::find(distances.begin(), distances.end(), v.distance_to_zone) != distances.end())
      violations.push_back("vehicle '" + v.id + "' ties another vehicle's distance on lane " +
                           std::to_string(v.lane));
    distances.push_back(v.distance_to_zone);
  }
  return violations;
}

}  // namespace cdsched
