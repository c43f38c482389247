#pragma once

// Serialization of a retained search tree to Graphviz DOT and JSON.

#include <sstream>
#include <stdexcept>
#include <string>

#include "cdsched/format.hpp"
#include "cdsched/mcts.hpp"
#include "json.hpp"

namespace cdsched {

namespace detail {

inline const SearchTree& require_tree(const SearchReport& report) {
  if (!report.tree_snapshot) throw std::logic_error("search tree was not retained (enable keep_tree)");
  return *report.tree_snapshot;
}

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

inline std::string dump_tree_dot(const SearchReport& report, const SchedulingProblem& problem) {
  const SearchTree& tree = detail::require_tree(report);
  std::ostringstream out;
  out << "digraph search_tree {\n  node [shape=box, fontsize=9];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    const std::string order = n.parent == kNoNode ? "(root)" : format_order(problem, tree.order_of(i));
    out << "  n" << i << " [label=\"" << detail::dot_escape(order) << "\\nvisits=" << n.visits
        << " J=" << format_number(n.own_delay) << " Jbest=" << format_number(n.best_descendant_delay)
        << " Q=" << format_number(n.score) << "\"];\n";
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    for (std::size_t c : tree.nodes[i].children) out << "  n" << i << " -> n" << c << ";\n";
  out << "}\n";
  return out.str();
}

inline nlohmann::json dump_tree_json(const SearchReport& report, const SchedulingProblem& problem) {
  const SearchTree& tree = detail::require_tree(report);
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    nlohmann::json node{{"id", i},
                        {"depth", n.depth},
                        {"order", format_order(problem, tree.order_of(i))},
                        {"visits", n.visits},
                        {"own_delay", n.own_delay},
                        {"score", n.score},
                        {"exhausted", n.exhausted},
                        {"children", n.children}};
    node["parent"] = n.parent == kNoNode ? nlohmann::json(nullptr) : nlohmann::json(n.parent);
    node["best_descendant_delay"] =
        std::isinf(n.best_descendant_delay) ? nlohmann::json(nullptr) : nlohmann::json(n.best_descendant_delay);
    nodes.push_back(std::move(node));
  }
  return nlohmann::json{{"nodes_expanded", report.nodes_expanded}, {"best_delay", report.best_delay}, {"nodes", nodes}};
}

}  // namespace cdsched
