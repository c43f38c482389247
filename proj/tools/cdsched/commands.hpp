#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cdsched/config.hpp"

namespace cdsched::cli {

struct RunSpec {
  std::string command;  // simulate | search | enumerate | sweep | dump-tree
  std::string config_path;
  std::vector<std::string> overrides;
  std::filesystem::path output_dir = "out";
  std::string format = "csv";  // csv | json
  std::size_t jobs = 1;
  bool record_timing = false;  // wall-clock columns make outputs run-dependent
};

/// Effective configuration: defaults, then the config file, then overrides.
json resolve_config(const RunSpec& spec);

int cmd_search(const RunSpec& spec, std::ostream& log);
int cmd_dump_tree(const RunSpec& spec, std::ostream& log);
int cmd_enumerate(const RunSpec& spec, std::ostream& log);
int cmd_simulate(const RunSpec& spec, std::ostream& log);
int cmd_sweep(const RunSpec& spec, std::ostream& log);

/// Dispatches on spec.command. Returns the process exit code; errors are
/// reported on `log`.
int run_command(const RunSpec& spec, std::ostream& log);

}  // namespace cdsched::cli
