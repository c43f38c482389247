#pragma once

// Exhaustive enumeration of every lane-order consistent passing order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cdsched/search.hpp"

namespace cdsched {

class EnumerationCapExceeded : public std::runtime_error {
 public:
  EnumerationCapExceeded(double count, std::uint64_t cap)
      : std::runtime_error(message(count, cap)), count_(count) {}

  double order_count() const { return count_; }

 private:
  static std::string message(double count, std::uint64_t cap) {
    std::ostringstream out;
    out.precision(3);
    out << "instance has about " << count << " valid passing orders, above the enumeration cap of " << cap
        << "; use the tree search instead";
    return out.str();
  }

  double count_;
};

/// Number of interleavings of the lane queues: n! / prod(lane_size!).
/// Saturates at UINT64_MAX; `approx` carries the floating value.
inline std::uint64_t count_valid_orders(const SchedulingProblem& problem, double* approx = nullptr) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  unsigned __int128 exact = 1;
  bool saturated = false;
  double value = 1.0;
  std::size_t placed = 0;
  for (LaneId lane = 0; lane < problem.model().lane_count(); ++lane) {
    const std::size_t k = problem.lane_queue(lane).size();
    // multiply by C(placed + k, k), built incrementally so every step stays integral
    for (std::size_t j = 1; j <= k; ++j) {
      ++placed;
      value = value * double(placed) / double(j);
      if (!saturated) {
        exact = exact * placed / j;
        if (exact > kMax) saturated = true;
      }
    }
  }
  if (approx) *approx = value;
  return saturated ? kMax : static_cast<std::uint64_t>(exact);
}

struct EnumerationResult {
  PassingOrder best_order;
  double best_delay = 0.0;
  std::uint64_t orders_visited = 0;
  std::vector<double> delays;  // every complete-order delay, when requested
};

struct EnumerationOptions {
  std::uint64_t cap = 10'000'000;
  bool collect_delays = false;
};

namespace detail {

inline void enumerate_dfs(OrderEvaluator& state, EnumerationResult& out, bool collect) {
  if (state.complete()) {
    const double j = state.total_delay();
    if (out.orders_visited == 0 || j < out.best_delay) {
      out.best_delay = j;
      out.best_order = state.order();
    }
    ++out.orders_visited;
    if (collect) out.delays.push_back(j);
    return;
  }
  const std::size_t lanes = state.problem().model().lane_count();
  for (LaneId lane = 0; lane < lanes; ++lane) {
    const std::size_t v = state.next_in_lane(lane);
    if (v == state.problem().size()) continue;
    state.append(v);
    enumerate_dfs(state, out, collect);
    state.undo();
  }
}

}  // namespace detail

inline EnumerationResult enumerate_optimal(const SchedulingProblem& problem, const EnumerationOptions& options = {}) {
  double approx = 0.0;
  const std::uint64_t count = count_valid_orders(problem, &approx);
  if (count > options.cap) throw EnumerationCapExceeded(approx, options.cap);
  EnumerationResult out;
  if (options.collect_delays) out.delays.reserve(count);
  OrderEvaluator state(problem);
  detail::enumerate_dfs(state, out, options.collect_delays);
  return out;
}

/// Position of a delay among all enumerated delays. `better` counts orders
/// strictly better (beyond a relative tolerance), rank = better + 1 and
/// percentile = better / total.
struct RankInfo {
  std::uint64_t better = 0;
  std::uint64_t rank = 1;
  double percentile = 0.0;
};

inline RankInfo rank_of(std::span<const double> delays, double delay) {
  const double threshold = delay - 1e-9 * (1.0 + std::abs(delay));
  RankInfo info;
  for (double d : delays)
    if (d < threshold) ++info.better;
  info.rank = info.better + 1;
  info.percentile = delays.empty() ? 0.0 : double(info.better) / double(delays.size());
  return info;
}

}  // namespace cdsched
