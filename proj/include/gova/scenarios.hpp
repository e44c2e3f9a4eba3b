#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gova/actor_runtime.hpp"
#include "gova/grid_config.hpp"
#include "gova/placement.hpp"
#include "gova/propagation.hpp"
#include "gova/smartgrid.hpp"

namespace gova {

struct ScenarioConfig {
  GridSpec grid = demo_grid_spec();
  std::uint64_t seed = 42;
  int k = 3;
  double balance_tol = 0.1;
  TierThresholds thresholds;
  Tick half_life = 24 * kHour;
  // Test hook: perturbs one oracle value so the harness must report a failure.
  bool corrupt_oracle = false;
  // Extra key/value pairs echoed into the report header.
  std::vector<std::pair<std::string, std::string>> echo;
};

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ScenarioReport {
  std::string name;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<Assertion> assertions;
  std::vector<std::pair<std::string, std::string>> metrics;

  void check(std::string assertion, bool passed, std::string detail = {});
  void metric(std::string key, const std::string& value);
  void metric(std::string key, double value);
  void metric(std::string key, std::int64_t value);

  [[nodiscard]] bool passed() const;
  [[nodiscard]] std::size_t failed_count() const;
  [[nodiscard]] std::string to_text() const;
};

const std::vector<std::string>& scenario_names();

// Throws UnknownScenario.
ScenarioReport run_scenario(const std::string& name, const ScenarioConfig& config);

ScenarioReport scenario_context(const ScenarioConfig& config);
ScenarioReport scenario_relationship(const ScenarioConfig& config);
ScenarioReport scenario_identity(const ScenarioConfig& config);
ScenarioReport scenario_behavior(const ScenarioConfig& config);

// Public operations the four scenarios are expected to exercise together.
const std::vector<std::string>& required_ops();
std::vector<std::string> coverage_gaps(const std::map<std::string, std::uint64_t>& counts);

// A short run of the demo grid (hourly readings, weather, one switch toggle,
// daily maintenance) used to obtain a realistic message trace.
struct DemoRun {
  std::unique_ptr<ActorRuntime> runtime;
  std::unique_ptr<ActionLog> log;
  Grid grid;
  Tick end = 0;
};
DemoRun run_demo(const ScenarioConfig& config, int days);

inline const TypeFilter& placement_filter() {
  static const TypeFilter f{std::string(rel::kFeeds), std::string(rel::kMeasures)};
  return f;
}

// Mean cost over `samples` random balanced assignments of the view.
double mean_random_cost(const MessageTrace& trace, const GraphView& view, int k, std::uint64_t seed, int samples,
                        const CostModel& model = {});

}  // namespace gova
