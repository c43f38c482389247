#pragma once

// Building blocks of the passing-order search: the FIFO baseline, the
// lane-order child rule, UCB1 selection, delay normalization and the two
// rollout policies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdsched/schedule.hpp"

namespace cdsched {

using Rng = std::mt19937_64;

inline std::string format_order(const SchedulingProblem& problem, std::span<const std::size_t> order,
                                std::string_view separator = ",") {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out += separator;
    out += problem.entrant(order[i]).id;
  }
  return out;
}

/// Merges the lane queues, always taking the lane front with the smallest
/// key. Produces a lane-order consistent order whatever the keys are.
template <typename Key>
PassingOrder lane_merge(const SchedulingProblem& problem, Key&& key) {
  std::vector<std::size_t> next(problem.model().lane_count(), 0);
  PassingOrder order;
  order.reserve(problem.size());
  while (order.size() < problem.size()) {
    std::size_t best = problem.size();
    for (LaneId lane = 0; lane < next.size(); ++lane) {
      const auto queue = problem.lane_queue(lane);
      if (next[lane] >= queue.size()) continue;
      const std::size_t v = queue[next[lane]];
      if (best == problem.size() || key(v) < key(best)) best = v;
    }
    order.push_back(best);
    ++next[problem.entrant(best).lane];
  }
  return order;
}

/// First-in-first-out baseline: ascending t_min, ties by id.
inline PassingOrder fifo_order(const SchedulingProblem& problem) {
  return lane_merge(problem, [&](std::size_t v) {
    const Entrant& e = problem.entrant(v);
    return std::pair<double, const std::string&>(e.earliest_entry, e.id);
  });
}

inline std::vector<std::size_t> valid_children(const SchedulingProblem& problem, std::span<const std::size_t> order) {
  OrderEvaluator evaluator(problem);
  evaluator.set_undo_tracking(false);
  for (std::size_t v : order) evaluator.append(v);
  std::vector<std::size_t> out;
  evaluator.candidates(out);
  return out;
}

struct ChildStats {
  double score = 0.0;
  std::size_t visits = 0;
};

/// UCB1: argmax of score + c * sqrt(ln n / n_i). Ties go to the lowest index.
inline std::size_t ucb1_select(std::span<const ChildStats> children, std::size_t parent_visits, double c) {
  if (children.empty()) throw std::invalid_argument("ucb1_select: node has no children");
  const double log_n = std::log(static_cast<double>(parent_visits));
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (children[i].visits == 0) throw std::invalid_argument("ucb1_select: unvisited child");
    const double value = children[i].score + c * std::sqrt(log_n / static_cast<double>(children[i].visits));
    if (value > best_value) {
      best_value = value;
      best = i;
    }
  }
  return best;
}

/// Running min/max registry used to map delays onto [0, 1], smaller delay to
/// larger value. Partial-order delays are ranged per depth, complete-order
/// delays globally.
class DelayNormalizer {
 public:
  void observe_partial(std::size_t depth, double delay) {
    if (depth >= by_depth_.size()) by_depth_.resize(depth + 1);
    by_depth_[depth].observe(delay);
  }
  void observe_complete(double delay) { complete_.observe(delay); }

  double partial_score(std::size_t depth, double delay) const {
    if (depth >= by_depth_.size() || !by_depth_[depth].seen)
      throw std::out_of_range("no partial delay registered at depth " + std::to_string(depth));
    return by_depth_[depth].score(delay);
  }
  double complete_score(double delay) const {
    if (!complete_.seen) throw std::out_of_range("no complete-order delay registered");
    return complete_.score(delay);
  }

 private:
  struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool seen = false;

    void observe(double v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      seen = true;
    }
    double score(double v) const {
      constexpr double slack = 1e-9;
      if (v < lo - slack * (1.0 + std::abs(lo)) || v > hi + slack * (1.0 + std::abs(hi)))
        throw std::out_of_range("delay outside the registered range");
      if (hi == lo) return 1.0;
      return std::clamp((hi - v) / (hi - lo), 0.0, 1.0);
    }
  };

  std::vector<Range> by_depth_;
  Range complete_;
};

/// Q = omega * s(own partial delay) + (1 - omega) * s(best descendant delay).
inline double node_score(double own_delay, double best_descendant_delay, double omega,
                         const DelayNormalizer& normalizer, std::size_t depth) {
  return omega * normalizer.partial_score(depth, own_delay) +
         (1.0 - omega) * normalizer.complete_score(best_descendant_delay);
}

struct RolloutResult {
  PassingOrder order;
  double delay = 0.0;
  std::size_t random_draws = 0;
};

/// Completes the order held by `state` (taken by value) with the heuristic
/// policy: among the lane fronts, a candidate that shares a subzone with every
/// other candidate and is no later than any of them at each subzone they
/// contest is appended; otherwise a candidate is drawn uniformly.
inline RolloutResult rollout_heuristic(OrderEvaluator state, Rng& rng) {
  state.set_undo_tracking(false);
  const SchedulingProblem& problem = state.problem();
  const IntersectionModel& model = problem.model();
  std::vector<std::size_t> candidates;
  std::vector<double> entry;
  std::vector<double> earliest_at(model.subzone_count(), std::numeric_limits<double>::infinity());
  std::size_t draws = 0;

  while (!state.complete()) {
    state.candidates(candidates);
    std::size_t pick = 0;
    if (candidates.size() > 1) {
      entry.resize(candidates.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        entry[i] = state.entry_time_if_appended(candidates[i]);
        const Route& r = problem.route(candidates[i]);
        for (std::size_t k = 0; k < r.size(); ++k) {
          const SubzoneId z = r.subzones[k];
          earliest_at[z] = std::min(earliest_at[z], entry[i] + r.offsets[k]);
        }
      }
      std::size_t dominant = candidates.size();
      for (std::size_t i = 0; i < candidates.size() && dominant == candidates.size(); ++i) {
        const LaneId lane = problem.entrant(candidates[i]).lane;
        bool ok = true;
        for (std::size_t j = 0; j < candidates.size() && ok; ++j)
          ok = i == j || model.conflicts(lane, problem.entrant(candidates[j]).lane);
        const Route& r = problem.route(candidates[i]);
        for (std::size_t k = 0; k < r.size() && ok; ++k)
          ok = entry[i] + r.offsets[k] <= earliest_at[r.subzones[k]];
        if (ok) dominant = i;
      }
      for (std::size_t c : candidates)
        for (SubzoneId z : problem.route(c).subzones) earliest_at[z] = std::numeric_limits<double>::infinity();
      if (dominant < candidates.size()) {
        pick = dominant;
      } else {
        pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
        ++draws;
      }
    }
    state.append(candidates[pick]);
  }
  return RolloutResult{state.order(), state.total_delay(), draws};
}

/// Completes the order by uniform draws among the valid children.
inline RolloutResult rollout_random(OrderEvaluator state, Rng& rng) {
  state.set_undo_tracking(false);
  std::vector<std::size_t> candidates;
  std::size_t draws = 0;
  while (!state.complete()) {
    state.candidates(candidates);
    std::size_t pick = 0;
    if (candidates.size() > 1) {
      pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
      ++draws;
    }
    state.append(candidates[pick]);
  }
  return RolloutResult{state.order(), state.total_delay(), draws};
}

inline OrderEvaluator evaluator_for(const SchedulingProblem& problem, std::span<const std::size_t> order) {
  OrderEvaluator evaluator(problem);
  for (std::size_t v : order) evaluator.append(v);
  return evaluator;
}

}  // namespace cdsched
