#pragma once

// Monte Carlo tree search over passing orders. Every iteration selects a node
// by UCB1, expands one of its untried children, completes the child's partial
// order with rollouts and propagates the best rollout delay back to the root.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdsched/search.hpp"

namespace cdsched {

enum class RolloutPolicy : std::uint8_t { Heuristic, Random };

inline std::string_view to_string(RolloutPolicy p) { return p == RolloutPolicy::Heuristic ? "heuristic" : "random"; }

inline RolloutPolicy parse_rollout_policy(std::string_view name) {
  if (name == "heuristic") return RolloutPolicy::Heuristic;
  if (name == "random") return RolloutPolicy::Random;
  throw std::invalid_argument("unknown rollout policy '" + std::string(name) + "'");
}

struct MctsConfig {
  double c = 0.05;
  double omega = 0.85;
  std::size_t budget_nodes = 1000;  // 0 disables the iteration budget
  double budget_time = 0.1;         // seconds; 0 disables the time budget
  RolloutPolicy rollout_policy = RolloutPolicy::Heuristic;
  std::size_t rollouts_per_expansion = 1;
  std::uint64_t rng_seed = 0;
  bool keep_tree = false;
  bool record_iterations = false;

  void validate() const {
    if (!(c >= 0.0)) throw std::invalid_argument("mcts: c must be >= 0");
    if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("mcts: omega must lie in [0, 1]");
    if (budget_nodes == 0 && !(budget_time > 0.0)) throw std::invalid_argument("mcts: no budget set");
    if (budget_time < 0.0) throw std::invalid_argument("mcts: negative time budget");
    if (rollouts_per_expansion == 0) throw std::invalid_argument("mcts: rollouts_per_expansion must be >= 1");
  }
};

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

struct TreeNode {
  std::size_t parent = kNoNode;
  std::size_t vehicle = kNoNode;  // vehicle appended by this node; none for the root
  std::size_t depth = 0;
  std::size_t visits = 0;
  double own_delay = 0.0;
  double best_descendant_delay = std::numeric_limits<double>::infinity();
  double score = 0.0;
  bool exhausted = false;  // every leaf below has been created
  std::vector<std::size_t> children;
  std::vector<std::size_t> unexpanded;  // vehicles not yet tried as children
};

struct SearchTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Partial order of a node, root first.
  PassingOrder order_of(std::size_t node) const {
    PassingOrder order;
    for (std::size_t n = node; nodes[n].parent != kNoNode; n = nodes[n].parent) order.push_back(nodes[n].vehicle);
    std::reverse(order.begin(), order.end());
    return order;
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  double best_delay = 0.0;
  std::size_t nodes_expanded = 0;
  double elapsed = 0.0;
};

struct SearchReport {
  PassingOrder best_order;
  double best_delay = 0.0;
  double fifo_delay = 0.0;
  std::size_t nodes_expanded = 0;
  std::size_t rollouts = 0;
  double elapsed = 0.0;
  bool exhausted = false;  // the whole tree was enumerated
  std::vector<IterationRecord> iterations;
  std::optional<SearchTree> tree_snapshot;
};

class MctsSearch {
 public:
  MctsSearch(const SchedulingProblem& problem, MctsConfig config)
      : problem_(problem), config_(config), rng_(config.rng_seed), path_(problem) {
    config_.validate();
    if (problem.empty()) throw std::invalid_argument("mcts_search: empty vehicle set");
  }

  SearchReport run() {
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    report_ = SearchReport{};
    const PassingOrder fifo = fifo_order(problem_);
    report_.best_order = fifo;
    report_.best_delay = interpret_order(problem_, fifo).total_delay;
    report_.fifo_delay = report_.best_delay;
    normalizer_ = DelayNormalizer{};
    normalizer_.observe_partial(0, 0.0);
    normalizer_.observe_complete(report_.best_delay);

    tree_.nodes.clear();
    tree_.nodes.emplace_back();
    path_ = OrderEvaluator(problem_);
    path_.candidates(tree_.nodes[0].unexpanded);

    while (!tree_.nodes[0].exhausted) {
      if (config_.budget_nodes && report_.nodes_expanded >= config_.budget_nodes) break;
      if (config_.budget_time > 0.0 && elapsed() >= config_.budget_time) break;
      iterate();
      if (config_.record_iterations)
        report_.iterations.push_back({report_.nodes_expanded, report_.best_delay, report_.nodes_expanded, elapsed()});
    }
    report_.exhausted = tree_.nodes[0].exhausted;
    report_.elapsed = elapsed();
    if (config_.keep_tree) report_.tree_snapshot = tree_;
    return std::move(report_);
  }

 private:
  void iterate() {
    // Selection.
    while (path_.depth() > 0) path_.undo();
    std::size_t node = 0;
    while (tree_.nodes[node].unexpanded.empty()) {
      node = select_child(node);
      path_.append(tree_.nodes[node].vehicle);
    }

    // Expansion.
    auto& untried = tree_.nodes[node].unexpanded;
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, untried.size() - 1)(rng_);
    const std::size_t vehicle = untried[pick];
    untried.erase(untried.begin() + static_cast<std::ptrdiff_t>(pick));
    path_.append(vehicle);

    const std::size_t child = tree_.nodes.size();
    tree_.nodes[node].children.push_back(child);
    TreeNode fresh;
    fresh.parent = node;
    fresh.vehicle = vehicle;
    fresh.depth = path_.depth();
    fresh.own_delay = path_.total_delay();
    path_.candidates(fresh.unexpanded);
    tree_.nodes.push_back(std::move(fresh));
    ++report_.nodes_expanded;

    // Simulation.
    double best = std::numeric_limits<double>::infinity();
    if (path_.complete()) {
      best = path_.total_delay();
      offer(path_.order(), best);
    } else {
      for (std::size_t r = 0; r < config_.rollouts_per_expansion; ++r) {
        RolloutResult rollout = config_.rollout_policy == RolloutPolicy::Heuristic ? rollout_heuristic(path_.detached(), rng_)
                                                                                   : rollout_random(path_.detached(), rng_);
        ++report_.rollouts;
        if (rollout.delay < best) best = rollout.delay;
        offer(rollout.order, rollout.delay);
      }
    }
    normalizer_.observe_partial(tree_.nodes[child].depth, tree_.nodes[child].own_delay);
    normalizer_.observe_complete(best);

    // Backpropagation.
    for (std::size_t n = child; n != kNoNode; n = tree_.nodes[n].parent) {
      TreeNode& t = tree_.nodes[n];
      ++t.visits;
      t.best_descendant_delay = std::min(t.best_descendant_delay, best);
      t.score = node_score(t.own_delay, t.best_descendant_delay, config_.omega, normalizer_, t.depth);
      t.exhausted = t.unexpanded.empty() &&
                    std::all_of(t.children.begin(), t.children.end(), [&](std::size_t c) { return tree_.nodes[c].exhausted; });
    }
  }

  std::size_t select_child(std::size_t node) {
    const TreeNode& parent = tree_.nodes[node];
    stats_.clear();
    open_.clear();
    for (std::size_t c : parent.children) {
      TreeNode& child = tree_.nodes[c];
      if (child.exhausted) continue;
      child.score = node_score(child.own_delay, child.best_descendant_delay, config_.omega, normalizer_, child.depth);
      stats_.push_back({child.score, child.visits});
      open_.push_back(c);
    }
    return open_[ucb1_select(stats_, parent.visits, config_.c)];
  }

  void offer(const PassingOrder& order, double delay) {
    if (delay < report_.best_delay) {
      report_.best_delay = delay;
      report_.best_order = order;
    }
  }

  const SchedulingProblem& problem_;
  MctsConfig config_;
  Rng rng_;
  OrderEvaluator path_;
  DelayNormalizer normalizer_;
  SearchTree tree_;
  SearchReport report_;
  std::vector<ChildStats> stats_;
  std::vector<std::size_t> open_;
};

inline SearchReport mcts_search(const SchedulingProblem& problem, const MctsConfig& config) {
  return MctsSearch(problem, config).run();
}

}  // namespace cdsched
