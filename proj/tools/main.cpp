#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cdsched/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cooperative intersection scheduling: tree search, exhaustive reference and traffic simulation"};
  app.require_subcommand(1);

  cdsched::cli::RunSpec spec;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy, rollout;
  std::optional<std::size_t> budget_nodes;
  std::optional<double> budget_time;

  const std::pair<const char*, const char*> commands[] = {
      {"search", "Search a passing order for one snapshot"},
      {"enumerate", "Enumerate every passing order of a small snapshot"},
      {"simulate", "Run the traffic simulation for each rate, seed and strategy"},
      {"sweep", "Sweep omega, c and budget over random snapshots"},
      {"dump-tree", "Search a snapshot and export the retained tree"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", spec.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", spec.overrides, "Override a key, e.g. mcts.omega=0.5 (repeatable)");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--format", spec.format, "Metrics format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    sub->add_option("--seed", seed, "Seed for the scenario, the search and the simulation");
    sub->add_option("--rollout", rollout, "Rollout policy")->check(CLI::IsMember({"heuristic", "random"}));
    sub->add_option("--budget-nodes", budget_nodes, "Node budget per search (0 disables)");
    sub->add_option("--budget-time", budget_time, "Time budget per search in seconds (0 disables)");
    sub->add_option("--jobs,-j", spec.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--timing", spec.record_timing, "Add wall-clock columns to outputs");
    if (std::string(name) == "simulate")
      sub->add_option("--strategy", strategy, "Run one strategy only")->check(CLI::IsMember({"fifo", "mcts", "oracle"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spec.command = app.get_subcommands().front()->get_name();
  spec.output_dir = out_dir;

  // Flags become overrides so the effective configuration records them.
  if (seed) {
    const std::string s = std::to_string(*seed);
    spec.overrides.insert(spec.overrides.end(),
                          {"scenario.random.seed=" + s, "mcts.seed=" + s, "simulation.seed=" + s});
  }
  if (strategy) spec.overrides.push_back("simulation.strategies=[\"" + *strategy + "\"]");
  if (rollout) spec.overrides.push_back("mcts.rollout=\"" + *rollout + "\"");
  if (budget_nodes) spec.overrides.push_back("mcts.budget_nodes=" + std::to_string(*budget_nodes));
  if (budget_time) spec.overrides.push_back("mcts.budget_time=" + std::to_string(*budget_time));

  return cdsched::cli::run_command(spec, std::cerr);
}
