#include "cdsched/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "cdsched/enumerate.hpp"
#include "cdsched/format.hpp"
#include "cdsched/mcts.hpp"
#include "cdsched/search.hpp"
#include "cdsched/sim.hpp"
#include "cdsched/tree_dump.hpp"

namespace cdsched::cli {

namespace {

namespace fs = std::filesystem;

// Rows of typed cells, rendered as CSV or as a JSON array of objects.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<json>> rows;

  void add(std::vector<json> row) {
    if (row.size() != header.size()) throw std::logic_error("table row width mismatch");
    rows.push_back(std::move(row));
  }
};

std::string cell_text(const json& v) {
  if (v.is_string()) return csv_field(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_number(v.get<double>());
  return v.dump();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_csv(const fs::path& path, const Table& table) {
  std::string text;
  for (std::size_t i = 0; i < table.header.size(); ++i) text += (i ? "," : "") + csv_field(table.header[i]);
  text += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + cell_text(row[i]);
    text += '\n';
  }
  write_text(path, text);
}

json table_json(const Table& table) {
  json out = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const json& v = row[i];
      // JSON has no infinity; store it as null
      obj[table.header[i]] = v.is_number_float() && !std::isfinite(v.get<double>()) ? json(nullptr) : v;
    }
    out.push_back(std::move(obj));
  }
  return out;
}

void write_table(const RunSpec& spec, const std::string& stem, const Table& table) {
  if (spec.format == "json")
    write_text(spec.output_dir / (stem + ".json"), table_json(table).dump(2) + "\n");
  else
    write_csv(spec.output_dir / (stem + ".csv"), table);
}

void write_effective_config(const RunSpec& spec, const json& config) {
  write_text(spec.output_dir / "effective_config.json", config.dump(2) + "\n");
}

// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception
// is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

struct Instance {
  IntersectionModel model;
  SafetyGapTable gaps;
  std::vector<Vehicle> vehicles;
};

Instance load_instance(const json& config) {
  Instance inst{build_intersection(intersection_config_from_json(config.at("intersection"))),
                gaps_from_json(config.at("safety_gap")),
                {}};
  inst.vehicles = scenario_vehicles(config, inst.model);
  return inst;
}

void write_schedule(const RunSpec& spec, const SchedulingProblem& problem, const PassingOrder& order) {
  const ScheduleResult schedule = interpret_order(problem, order);
  Table table{{"position", "vehicle", "lane", "movement", "t_min", "entry_time", "delay", "arrivals"}, {}};
  std::size_t position = 0;
  for (const ScheduledVehicle& s : schedule.entries) {
    const Entrant& e = problem.entrant(s.vehicle);
    const Route& route = problem.route(s.vehicle);
    std::string arrivals;
    for (std::size_t k = 0; k < route.size(); ++k)
      arrivals += (k ? ";" : "") + std::to_string(route.subzones[k]) + ":" + format_number(s.arrivals[k]);
    table.add({position++, e.id, problem.model().lane_label(e.lane), std::string(to_string(e.movement)),
               s.earliest_entry, s.entry_time, s.delay, arrivals});
  }
  write_table(spec, "schedule", table);
}

struct SearchOutcome {
  SearchReport report;
  std::optional<EnumerationResult> optimum;
};

SearchOutcome run_search(const RunSpec& spec, const json& config, const SchedulingProblem& problem, bool keep_tree,
                         std::ostream& log) {
  MctsConfig mcts = mcts_config_from_json(config.at("mcts"));
  mcts.keep_tree = keep_tree;
  mcts.record_iterations = true;
  SearchOutcome out{mcts_search(problem, mcts), std::nullopt};
  const auto cap = config.at("enumerate").at("cap").get<std::uint64_t>();
  if (count_valid_orders(problem) <= cap) out.optimum = enumerate_optimal(problem, {cap, false});
  else
    log << "note: instance too large for the exact reference (cap " << cap << "); j_opt omitted\n";

  const SearchReport& r = out.report;
  std::vector<std::string> header{"vehicles", "j_fifo", "j_mcts", "j_opt", "eta", "eta_opt",
                                  "nodes_expanded", "rollouts", "exhausted", "mcts_order"};
  std::vector<json> row{problem.size(),
                        r.fifo_delay,
                        r.best_delay,
                        out.optimum ? json(out.optimum->best_delay) : json(nullptr),
                        improvement_rate(r.fifo_delay, r.best_delay),
                        out.optimum ? json(improvement_rate(r.fifo_delay, out.optimum->best_delay)) : json(nullptr),
                        r.nodes_expanded,
                        r.rollouts,
                        r.exhausted,
                        format_order(problem, r.best_order, " ")};
  if (spec.record_timing) {
    header.push_back("elapsed");
    row.push_back(r.elapsed);
  }
  Table metrics{header, {}};
  metrics.add(row);
  write_table(spec, "metrics", metrics);

  Table iterations{{"iteration", "best_delay", "nodes_expanded"}, {}};
  if (spec.record_timing) iterations.header.push_back("elapsed");
  for (const IterationRecord& it : r.iterations) {
    std::vector<json> cells{it.iteration, it.best_delay, it.nodes_expanded};
    if (spec.record_timing) cells.push_back(it.elapsed);
    iterations.add(cells);
  }
  write_csv(spec.output_dir / "iterations.csv", iterations);
  write_schedule(spec, problem, r.best_order);
  return out;
}

void write_sim_trace(const fs::path& path, const Simulator& sim) {
  Table trace{{"vehicle", "lane", "movement", "spawn_time", "admit_time", "entry_time", "exit_time", "delay"}, {}};
  const auto nan_or = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  for (const SimVehicle& v : sim.state().vehicles)
    trace.add({v.id, sim.config().model.lane_label(v.lane), std::string(to_string(v.movement)), v.spawn_time,
               nan_or(v.admit_time), nan_or(v.entry_time), nan_or(v.exit_time),
               std::isnan(v.entry_time) ? json(nullptr) : json(v.delay)});
  write_csv(path, trace);
}

}  // namespace

json resolve_config(const RunSpec& spec) {
  json config = spec.config_path.empty() ? default_config() : effective_config(load_config_file(spec.config_path));
  for (const std::string& o : spec.overrides) apply_override(config, o);
  // Re-run the checked merge so overrides cannot introduce malformed sections.
  return effective_config(config);
}

int cmd_search(const RunSpec& spec, std::ostream& log) {
  const json config = resolve_config(spec);
  const Instance inst = load_instance(config);
  const SchedulingProblem problem = SchedulingProblem::from_vehicles(inst.model, inst.gaps, inst.vehicles);
  write_effective_config(spec, config);
  const SearchOutcome out = run_search(spec, config, problem, false, log);
  log << "fifo " << format_number(out.report.fifo_delay) << "  mcts " << format_number(out.report.best_delay);
  if (out.optimum) log << "  optimal " << format_number(out.optimum->best_delay);
  log << "  nodes " << out.report.nodes_expanded << '\n';
  return 0;
}

int cmd_dump_tree(const RunSpec& spec, std::ostream& log) {
  const json config = resolve_config(spec);
  const Instance inst = load_instance(config);
  const SchedulingProblem problem = SchedulingProblem::from_vehicles(inst.model, inst.gaps, inst.vehicles);
  write_effective_config(spec, config);
  const SearchOutcome out = run_search(spec, config, problem, true, log);
  write_text(spec.output_dir / "tree.dot", dump_tree_dot(out.report, problem));
  write_text(spec.output_dir / "tree.json", dump_tree_json(out.report, problem).dump(2) + "\n");
  log << "tree with " << out.report.tree_snapshot->nodes.size() << " nodes written\n";
  return 0;
}

int cmd_enumerate(const RunSpec& spec, std::ostream& log) {
  const json config = resolve_config(spec);
  const Instance inst = load_instance(config);
  const SchedulingProblem problem = SchedulingProblem::from_vehicles(inst.model, inst.gaps, inst.vehicles);
  const json& section = config.at("enumerate");
  const auto cap = section.at("cap").get<std::uint64_t>();
  const auto bins = section.at("bins").get<std::size_t>();
  if (bins == 0) throw ConfigError("enumerate.bins must be positive");
  write_effective_config(spec, config);

  const EnumerationResult all = enumerate_optimal(problem, {cap, true});
  const double j_fifo = total_delay(interpret_order(problem, fifo_order(problem)));
  MctsConfig mcts = mcts_config_from_json(config.at("mcts"));
  const SearchReport report = mcts_search(problem, mcts);
  const RankInfo fifo_rank = rank_of(all.delays, j_fifo);
  const RankInfo mcts_rank = rank_of(all.delays, report.best_delay);

  Table metrics{{"vehicles", "orders", "j_opt", "j_fifo", "fifo_rank", "fifo_percentile", "j_mcts", "mcts_rank",
                 "mcts_percentile", "optimal_order"},
                {}};
  metrics.add({problem.size(), all.orders_visited, all.best_delay, j_fifo, fifo_rank.rank, fifo_rank.percentile,
               report.best_delay, mcts_rank.rank, mcts_rank.percentile, format_order(problem, all.best_order, " ")});
  write_table(spec, "metrics", metrics);

  const auto [lo_it, hi_it] = std::minmax_element(all.delays.begin(), all.delays.end());
  const double lo = *lo_it, hi = *hi_it;
  Table histogram{{"bin", "lower", "upper", "count"}, {}};
  if (hi > lo) {
    std::vector<std::uint64_t> counts(bins, 0);
    const double width = (hi - lo) / double(bins);
    for (double d : all.delays) ++counts[std::min(bins - 1, std::size_t((d - lo) / width))];
    for (std::size_t b = 0; b < bins; ++b)
      histogram.add({b, lo + width * double(b), b + 1 == bins ? hi : lo + width * double(b + 1), counts[b]});
  } else {
    histogram.add({0, lo, hi, all.delays.size()});
  }
  write_csv(spec.output_dir / "histogram.csv", histogram);

  if (section.at("raw").get<bool>()) {
    std::string text = "delay\n";
    for (double d : all.delays) text += format_number(d) + '\n';
    write_text(spec.output_dir / "delays.csv", text);
  }
  write_schedule(spec, problem, all.best_order);
  log << all.orders_visited << " orders; optimal " << format_number(all.best_delay) << ", fifo rank "
      << fifo_rank.rank << ", mcts rank " << mcts_rank.rank << '\n';
  return 0;
}

int cmd_simulate(const RunSpec& spec, std::ostream& log) {
  const json config = resolve_config(spec);
  const json& sim = config.at("simulation");
  const auto rates = sim.at("arrival_rates").get<std::vector<double>>();
  const auto base_seed = sim.at("seed").get<std::uint64_t>();
  const auto seed_count = sim.at("seeds").get<std::size_t>();
  const auto strategy_names = sim.at("strategies").get<std::vector<std::string>>();
  const bool trace = sim.at("trace").get<bool>();
  if (rates.empty() || seed_count == 0 || strategy_names.empty())
    throw ConfigError("simulation needs at least one arrival rate, seed and strategy");

  std::vector<Strategy> strategies;
  for (const std::string& name : strategy_names) {
    Strategy s{parse_strategy(name), mcts_config_from_json(config.at("mcts")),
               sim.at("enumeration_cap").get<std::uint64_t>()};
    strategies.push_back(s);
  }
  // Validate every scenario before starting any run.
  for (double rate : rates) (void)scenario_config_from_json(config, rate, base_seed);
  write_effective_config(spec, config);

  struct Job {
    double rate;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double rate : rates)
    for (std::size_t k = 0; k < seed_count; ++k) jobs.push_back({rate, base_seed + k});

  // results[job][strategy]
  std::vector<std::vector<Metrics>> results(jobs.size());
  std::vector<std::vector<std::string>> failures(jobs.size());
  parallel_for(jobs.size(), spec.jobs, [&](std::size_t j) {
    const ScenarioConfig scenario = scenario_config_from_json(config, jobs[j].rate, jobs[j].seed);
    std::optional<double> fifo_average;
    const auto fifo_avg = [&] {
      if (!fifo_average) fifo_average = run_simulation(scenario, Strategy{StrategyKind::Fifo, {}, 0}).average_delay;
      return *fifo_average;
    };
    for (const Strategy& strategy : strategies) {
      Simulator simulator(scenario, strategy);
      simulator.run();
      Metrics m = simulator.metrics();
      if (strategy.kind == StrategyKind::Fifo) fifo_average = m.average_delay;
      results[j].push_back(m);
      for (const std::string& line : simulator.replans().log)
        failures[j].push_back(std::string(to_string(strategy.kind)) + " " + line);
      if (trace) {
        const std::string run = std::string(to_string(strategy.kind)) + "_rate" + format_number(jobs[j].rate) +
                                "_seed" + std::to_string(jobs[j].seed);
        write_sim_trace(spec.output_dir / "runs" / run / "trace.csv", simulator);
      }
    }
    for (Metrics& m : results[j])
      m.eta = m.strategy == "fifo" ? 0.0 : improvement_rate(fifo_avg(), m.average_delay);
  });

  Table metrics{{"arrival_rate", "seed", "strategy", "generated", "throughput", "total_delay", "average_delay", "eta",
                 "replans", "nodes_mean", "nodes_max", "min_replan_eta", "strategy_failures"},
                {}};
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (const Metrics& m : results[j])
      metrics.add({m.arrival_rate, m.seed, m.strategy, m.generated, m.throughput, m.total_delay, m.average_delay,
                   m.eta, m.replan_count, m.nodes_mean, m.nodes_max, m.min_replan_eta, m.strategy_failures});
    for (const std::string& line : failures[j]) log << "warning: " << line << '\n';
  }
  write_table(spec, "metrics", metrics);
  for (const auto& row : metrics.rows)
    log << "rate " << cell_text(row[0]) << " seed " << cell_text(row[1]) << " " << cell_text(row[2])
        << ": avg delay " << cell_text(row[6]) << " s, throughput " << cell_text(row[4]) << '\n';
  return 0;
}

int cmd_sweep(const RunSpec& spec, std::ostream& log) {
  const json config = resolve_config(spec);
  const json& sweep = config.at("sweep");
  const auto omegas = sweep.at("omega").get<std::vector<double>>();
  const auto cs = sweep.at("c").get<std::vector<double>>();
  const auto budgets = sweep.at("budgets").get<std::vector<std::size_t>>();
  const auto scenario_count = sweep.at("scenarios").get<std::size_t>();
  const auto seed_count = sweep.at("seeds").get<std::size_t>();
  if (omegas.empty() || cs.empty() || budgets.empty() || scenario_count == 0 || seed_count == 0)
    throw ConfigError("sweep grid is empty");

  const IntersectionModel model = build_intersection(intersection_config_from_json(config.at("intersection")));
  const SafetyGapTable gaps = gaps_from_json(config.at("safety_gap"));
  const MctsConfig base = mcts_config_from_json(config.at("mcts"));
  const bool explicit_vehicles = !config.at("scenario").at("vehicles").empty();
  const std::size_t scenarios = explicit_vehicles ? 1 : scenario_count;
  const auto scenario_seed = config.at("scenario").at("random").at("seed").get<std::uint64_t>();

  std::vector<std::vector<Vehicle>> vehicle_sets;
  for (std::size_t s = 0; s < scenarios; ++s) {
    json c = config;
    c["scenario"]["random"]["seed"] = scenario_seed + s;
    vehicle_sets.push_back(scenario_vehicles(c, model));
  }
  std::vector<SchedulingProblem> problems;
  std::vector<double> fifo_delays;
  for (const auto& vs : vehicle_sets) {
    problems.push_back(SchedulingProblem::from_vehicles(model, gaps, vs));
    fifo_delays.push_back(total_delay(interpret_order(problems.back(), fifo_order(problems.back()))));
  }
  for (double o : omegas)
    for (double c : cs) {
      MctsConfig probe = base;
      probe.omega = o;
      probe.c = c;
      probe.validate();
    }
  write_effective_config(spec, config);

  struct Point {
    double omega, c;
    std::size_t budget;
  };
  std::vector<Point> grid;
  for (double o : omegas)
    for (double c : cs)
      for (std::size_t b : budgets) grid.push_back({o, c, b});

  const std::size_t runs = scenarios * seed_count;
  std::vector<double> etas(grid.size() * runs);
  parallel_for(etas.size(), spec.jobs, [&](std::size_t i) {
    const Point& p = grid[i / runs];
    const std::size_t s = (i % runs) / seed_count, k = i % seed_count;
    MctsConfig mcts = base;
    mcts.omega = p.omega;
    mcts.c = p.c;
    mcts.budget_nodes = p.budget;
    mcts.rng_seed = base.rng_seed + k;
    etas[i] = improvement_rate(fifo_delays[s], mcts_search(problems[s], mcts).best_delay);
  });

  Table table{{"omega", "c", "budget_nodes", "runs", "mean_eta", "min_eta", "max_eta"}, {}};
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto first = etas.begin() + std::ptrdiff_t(g * runs), last = first + std::ptrdiff_t(runs);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) sum += *it;
    const auto [mn, mx] = std::minmax_element(first, last);
    table.add({grid[g].omega, grid[g].c, grid[g].budget, runs, sum / double(runs), *mn, *mx});
  }
  write_csv(spec.output_dir / "sweep.csv", table);
  log << grid.size() << " grid points x " << runs << " runs written to " << (spec.output_dir / "sweep.csv").string()
      << '\n';
  return 0;
}

int run_command(const RunSpec& spec, std::ostream& log) {
  using Handler = int (*)(const RunSpec&, std::ostream&);
  static const std::pair<const char*, Handler> table[] = {{"search", cmd_search},     {"dump-tree", cmd_dump_tree},
                                                          {"enumerate", cmd_enumerate}, {"simulate", cmd_simulate},
                                                          {"sweep", cmd_sweep}};
  if (spec.format != "csv" && spec.format != "json") {
    log << "error: unknown format '" << spec.format << "' (expected csv or json)\n";
    return 2;
  }
  for (const auto& [name, handler] : table) {
    if (spec.command != name) continue;
    try {
      return handler(spec, log);
    } catch (const EnumerationCapExceeded& e) {
      log << "error: " << e.what() << '\n';
      return 3;
    } catch (const std::exception& e) {
      log << "error: " << spec.command << ": " << e.what() << '\n';
      return 1;
    }
  }
  log << "error: unknown command '" << spec.command << "'\n";
  return 2;
}

}  // namespace cdsched::cli
