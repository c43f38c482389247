#include <gtest/gtest.h>

#include "cdsched/sim.hpp"
#include "support.hpp"

using namespace cdsched;
using namespace cdsched::testing;

namespace {

ScenarioConfig small_config(double rate, std::uint64_t seed, double horizon = 120.0) {
  ScenarioConfig c;
  c.arrival_rate = rate;
  c.rng_seed = seed;
  c.horizon = horizon;
  return c;
}

Strategy mcts_strategy(std::size_t nodes = 200) {
  Strategy s;
  s.kind = StrategyKind::Mcts;
  s.mcts.budget_nodes = nodes;
  s.mcts.budget_time = 0.0;
  return s;
}

}  // namespace

TEST(Arrivals, PoissonMeanMatchesRate) {
  ScenarioConfig c;
  c.model = one_lane_model();
  c.arrival_rate = 360.0;
  c.horizon = 600.0;
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    c.rng_seed = seed;
    total += double(generate_arrivals(c)[0].size());
  }
  EXPECT_NEAR(total / 100.0, 60.0, 3.0);
}

TEST(Arrivals, ZeroRateAndDeterminism) {
  ScenarioConfig c = small_config(0.0, 4);
  for (const auto& lane : generate_arrivals(c)) EXPECT_TRUE(lane.empty());
  c.arrival_rate = 500.0;
  EXPECT_EQ(generate_arrivals(c), generate_arrivals(c));
  const auto a = generate_arrivals(c);
  for (const auto& lane : a) {
    EXPECT_TRUE(std::is_sorted(lane.begin(), lane.end()));
    for (double t : lane) EXPECT_LT(t, c.horizon);
  }
  c.rng_seed = 5;
  EXPECT_NE(generate_arrivals(c), a);
}

TEST(Arrivals, LaneRatesOverrideTheCommonRate) {
  ScenarioConfig c = small_config(300.0, 2);
  c.model = one_lane_model();
  c.lane_rates = {500.0, 0.0, 0.0, 0.0};
  const auto a = generate_arrivals(c);
  EXPECT_FALSE(a[0].empty());
  for (LaneId lane = 1; lane < 4; ++lane) EXPECT_TRUE(a[lane].empty());
}

TEST(ScenarioConfig, Validation) {
  ScenarioConfig c = small_config(100.0, 1);
  c.replan_period = 0.25;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config(-1.0, 1);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config(100.0, 1);
  c.horizon = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  IntersectionConfig short_zone;
  short_zone.control_zone_length = 20.0;
  c = small_config(100.0, 1);
  c.model = build_intersection(short_zone);
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Simulator, ZeroDemandProducesNothing) {
  const Metrics m = run_simulation(small_config(0.0, 1), Strategy{});
  EXPECT_EQ(m.generated, 0u);
  EXPECT_EQ(m.throughput, 0u);
  EXPECT_EQ(m.average_delay, 0.0);
  EXPECT_EQ(m.replan_count, 0u);
}

TEST(Simulator, SparseSingleLegDemandHasNoDelay) {
  ScenarioConfig c = small_config(0.0, 3, 600.0);
  c.model = one_lane_model();
  c.lane_rates = {60.0, 0.0, 0.0, 0.0};
  const Metrics m = run_simulation(c, mcts_strategy());
  EXPECT_GT(m.throughput, 0u);
  EXPECT_LT(m.average_delay, 0.05);
}

TEST(Simulator, QueueHeadWaitsForEntryGap) {
  ScenarioConfig c = small_config(0.0, 8, 60.0);
  c.model = one_lane_model();
  c.lane_rates = {20000.0, 0.0, 0.0, 0.0};  // far beyond what the gap rule admits
  Simulator sim(c, Strategy{});
  const double length = c.model.control_zone_length();
  std::size_t blocked_steps = 0;
  while (!sim.finished()) {
    sim.step();
    const SimState& s = sim.state();
    if (s.queues[0].empty() || s.approaching[0].empty()) continue;
    // The head is still queued, so the last admitted vehicle was within the
    // gap at admission and has moved at most one step since.
    const SimVehicle& last = s.vehicles[s.approaching[0].back()];
    if (last.admit_time + c.time_step < s.clock - 1e-9) continue;
    EXPECT_GT(last.distance, length - c.min_entry_gap - c.kinematics.v_max * c.time_step - 1e-9);
    ++blocked_steps;
  }
  EXPECT_GT(blocked_steps, 0u);
  std::vector<double> admits;
  for (const SimVehicle& v : sim.state().vehicles)
    if (!std::isnan(v.admit_time)) admits.push_back(v.admit_time);
  // A vehicle admitted in its arrival step keeps up to one step of progress.
  for (std::size_t k = 1; k < admits.size(); ++k)
    EXPECT_GE(admits[k] - admits[k - 1], c.min_entry_gap / c.kinematics.v_max - c.time_step - 1e-9);
}

TEST(Simulator, ConservationSpeedLimitsAndExactArrivals) {
  ScenarioConfig c = small_config(450.0, 5, 200.0);
  Simulator sim(c, mcts_strategy());
  while (!sim.finished()) {
    sim.step();
    ASSERT_TRUE(sim.conserved());
    for (const auto& lane : sim.state().approaching)
      for (std::size_t idx : lane) {
        const SimVehicle& v = sim.state().vehicles[idx];
        ASSERT_GE(v.speed, 0.0);
        ASSERT_LE(v.speed, c.kinematics.v_max + 1e-9);
        ASSERT_TRUE(v.assigned_entry || v.admit_time >= sim.state().clock - c.replan_period);
      }
  }
  std::size_t entered = 0;
  for (const SimVehicle& v : sim.state().vehicles) {
    if (std::isnan(v.entry_time)) continue;
    ++entered;
    ASSERT_TRUE(v.assigned_entry.has_value());
    EXPECT_NEAR(v.entry_time, *v.assigned_entry, c.time_step / 2);
    EXPECT_GE(v.entry_time, v.planned_t_min - 1e-6);
    // realized subzone times are the entry plus the route's offsets
    const auto arrivals = realized_arrivals(c.model, v);
    const Route& r = c.model.route(v.lane);
    for (std::size_t k = 0; k < r.size(); ++k) EXPECT_NEAR(arrivals[k] - v.entry_time, r.offsets[k], 1e-9);
  }
  EXPECT_GT(entered, 50u);
  EXPECT_TRUE(check_safety(c, sim.state(), c.time_step).empty());
}

TEST(Simulator, DeparturesKeepLaneOrder) {
  Simulator sim(small_config(400.0, 6, 200.0), Strategy{});
  sim.run();
  std::vector<double> last_spawn(sim.config().model.lane_count(), -1.0);
  for (std::size_t idx : sim.state().departed) {
    const SimVehicle& v = sim.state().vehicles[idx];
    EXPECT_GT(v.spawn_time, last_spawn[v.lane]) << v.id;
    last_spawn[v.lane] = v.spawn_time;
  }
}

TEST(Simulator, CommittedOccupancySeedsEveryReplan) {
  // With heavy demand, vehicles are always inside the conflict zone while the
  // rest replan; any failure to respect them shows up as a headway violation.
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Simulator sim(small_config(600.0, seed, 120.0), mcts_strategy(100));
    sim.run();
    EXPECT_TRUE(check_safety(sim.config(), sim.state(), sim.config().time_step).empty());
    EXPECT_EQ(sim.replans().failures, 0u);
  }
}

TEST(Simulator, MctsNeverWorseThanFifoAtAnyReplan) {
  const Metrics m = run_simulation(small_config(450.0, 2, 120.0), mcts_strategy());
  EXPECT_GT(m.replan_count, 0u);
  EXPECT_GE(m.min_replan_eta, 0.0);
  EXPECT_GT(m.nodes_mean, 0.0);
}

TEST(Simulator, OracleStrategyRunsSafely) {
  ScenarioConfig c = small_config(200.0, 7, 80.0);
  c.model = one_lane_model();
  Strategy s;
  s.kind = StrategyKind::Oracle;
  s.enumeration_cap = 500'000;
  Simulator sim(c, s);
  sim.run();
  EXPECT_TRUE(check_safety(c, sim.state(), c.time_step).empty());
  EXPECT_GT(sim.metrics().throughput, 0u);
}

TEST(Simulator, OracleOverCapFallsBackAndLogs) {
  ScenarioConfig c = small_config(900.0, 1, 60.0);
  Strategy s;
  s.kind = StrategyKind::Oracle;
  s.enumeration_cap = 1;
  Simulator sim(c, s);
  sim.run();
  EXPECT_GT(sim.replans().failures, 0u);
  EXPECT_EQ(sim.replans().failures, sim.replans().log.size());
  EXPECT_TRUE(check_safety(c, sim.state(), c.time_step).empty());
}

TEST(Simulator, IdenticalSeedsGiveIdenticalMetrics) {
  const ScenarioConfig c = small_config(300.0, 9, 150.0);
  const Metrics a = run_experiment(c, mcts_strategy()), b = run_experiment(c, mcts_strategy());
  EXPECT_EQ(a.total_delay, b.total_delay);
  EXPECT_EQ(a.throughput, b.throughput);
  EXPECT_EQ(a.eta, b.eta);
  EXPECT_EQ(a.nodes_mean, b.nodes_mean);
}

TEST(Simulator, ExperimentEtaComparesAgainstPairedFifo) {
  const ScenarioConfig c = small_config(400.0, 4, 150.0);
  const Metrics fifo = run_simulation(c, Strategy{});
  const Metrics m = run_experiment(c, mcts_strategy());
  EXPECT_DOUBLE_EQ(m.eta, improvement_rate(fifo.average_delay, m.average_delay));
  EXPECT_LE(m.throughput, m.generated);
  EXPECT_EQ(run_experiment(c, Strategy{}).eta, 0.0);
}

TEST(Strategy, NamesRoundTrip) {
  for (StrategyKind k : {StrategyKind::Fifo, StrategyKind::Mcts, StrategyKind::Oracle})
    EXPECT_EQ(parse_strategy(to_string(k)), k);
  EXPECT_THROW(parse_strategy("signal"), std::invalid_argument);
}
