#include "gova/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "gova/scenarios.hpp"

namespace gova {

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  return {
      {"command", command},
      {"spec", spec_path.value_or("demo")},
      {"out", output_dir},
  };
}

namespace {

constexpr int kOk = 0;
constexpr int kAssertionFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void apply_config_file(RunConfig& rc, const CLI::App& sub) {
  if (!rc.config_path) return;
  std::ifstream in(*rc.config_path);
  if (!in) throw UsageError("cannot open config " + *rc.config_path);
  for (const auto& sec : parse_config(in)) {
    if (sec.name != "run") continue;
    for (const auto& [key, value] : sec.entries) {
      auto given = [&](const char* flag) { return sub.count(flag) > 0; };
      try {
        if (key == "spec") {
          if (!given("--spec")) rc.spec_path = value;
        } else if (key == "name") {
          if (!given("--name")) rc.name = value;
        } else if (key == "k") {
          if (!given("--k")) rc.k = std::stoi(value);
        } else if (key == "balance_tol") {
          if (!given("--balance-tol")) rc.balance_tol = std::stod(value);
        } else if (key == "seed") {
          if (!given("--seed")) rc.seed = std::stoull(value);
        } else if (key == "out") {
          if (!given("--out")) rc.output_dir = value;
        } else if (key == "hot_min") {
          if (!given("--hot-min")) rc.hot_min = std::stod(value);
        } else if (key == "cold_max") {
          if (!given("--cold-max")) rc.cold_max = std::stod(value);
        } else if (key == "half_life") {
          if (!given("--half-life")) rc.half_life_h = std::stod(value);
        } else {
          throw UsageError("unknown [run] key " + key);
        }
      } catch (const std::logic_error&) {
        throw UsageError("bad value for [run] " + key + ": " + value);
      }
    }
  }
}

ScenarioConfig scenario_config(const RunConfig& rc) {
  ScenarioConfig c;
  if (rc.spec_path) {
    std::ifstream in(*rc.spec_path);
    if (!in) throw UsageError("cannot open spec " + *rc.spec_path);
    c.grid = read_grid_spec(in);
  }
  c.seed = rc.seed.value_or(c.grid.seed);
  c.k = rc.k;
  c.balance_tol = rc.balance_tol;
  c.thresholds = {rc.hot_min, rc.cold_max};
  if (!(c.thresholds.hot_min > c.thresholds.cold_max)) throw UsageError("--hot-min must exceed --cold-max");
  if (rc.half_life_h <= 0) throw UsageError("--half-life must be positive");
  c.half_life = static_cast<Tick>(rc.half_life_h * static_cast<double>(kHour));
  c.echo = rc.echo();
  return c;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::PersistenceFailure, "cannot write " + path.string());
  f << body;
}

std::string config_header(const ScenarioConfig& c, const std::string& title) {
  std::ostringstream out;
  out << "report = " << title << '\n';
  out << "config.seed = " << c.seed << '\n';
  out << "config.k = " << c.k << '\n';
  out << "config.balance_tol = " << format_double(c.balance_tol) << '\n';
  out << "config.hot_min = " << format_double(c.thresholds.hot_min) << '\n';
  out << "config.cold_max = " << format_double(c.thresholds.cold_max) << '\n';
  out << "config.half_life_h = " << format_double(static_cast<double>(c.half_life) / static_cast<double>(kHour)) << '\n';
  for (const auto& [k, v] : c.echo) out << "config." << k << " = " << v << '\n';
  return out.str();
}

constexpr int kDemoDays = 7;
constexpr int kRandomSamples = 100;

int cmd_build(const RunConfig& rc, std::ostream& out) {
  auto c = scenario_config(rc);
  ActorRuntime rt(RuntimeOptions{});
  build_grid(rt, c.grid);
  std::ostringstream graph;
  write_graph(rt.graph(), graph);
  const auto dir = std::filesystem::path(rc.output_dir);
  write_file(dir / "graph.txt", graph.str());
  std::ostringstream spec;
  write_grid_spec(c.grid, spec);
  write_file(dir / "grid_spec.txt", spec.str());

  const bool actors_ok = rt.actor_count() == expected_actor_count(c.grid);
  const bool edges_ok = rt.graph().edges().size() == expected_edge_count(c.grid);
  std::ostringstream rep;
  rep << config_header(c, "build");
  rep << "actors = " << rt.actor_count() << " expected = " << expected_actor_count(c.grid) << '\n';
  rep << "edges = " << rt.graph().edges().size() << " expected = " << expected_edge_count(c.grid) << '\n';
  rep << "result = " << (actors_ok && edges_ok ? "PASS" : "FAIL") << '\n';
  write_file(dir / "build.txt", rep.str());
  out << "build: " << rt.actor_count() << " actors, " << rt.graph().edges().size() << " edges\n";
  return actors_ok && edges_ok ? kOk : kAssertionFailure;
}

bool write_scenario(const ScenarioConfig& c, const std::string& name, const std::filesystem::path& dir,
                    std::ostream& out) {
  auto report = run_scenario(name, c);
  write_file(dir / ("scenario_" + name + ".txt"), report.to_text());
  out << "scenario " << name << ": " << (report.passed() ? "PASS" : "FAIL") << '\n';
  return report.passed();
}

// Placement and cost reports over one demo run.
bool write_placement_and_cost(const ScenarioConfig& c, const std::filesystem::path& dir, bool placement, bool cost,
                              std::ostream& out) {
  auto demo = run_demo(c, kDemoDays);
  auto& rt = *demo.runtime;
  const auto view = rt.graph().snapshot_at(demo.end);
  CutReport cut;
  const auto assignment = partition(view, c.k, placement_filter(), c.balance_tol, c.seed, &cut);
  bool ok = true;

  if (placement) {
    std::ostringstream tsv;
    write_assignment(assignment, tsv);
    write_file(dir / "assignment.tsv", tsv.str());
    double random_cut = 0.0;
    for (int i = 0; i < kRandomSamples; ++i) {
      auto a = random_balanced_assignment(view, c.k, mix_seed(c.seed, "random/" + std::to_string(i)));
      random_cut += cut_weight(view, a, placement_filter());
    }
    random_cut /= kRandomSamples;
    const bool balanced = is_balanced(assignment, view.node_count(), c.balance_tol);
    std::ostringstream rep;
    rep << config_header(c, "placement");
    rep << "type_filter = feeds,measures\n";
    rep << "nodes = " << view.node_count() << '\n';
    rep << "balance_cap = " << balance_cap(view.node_count(), c.k, c.balance_tol) << '\n';
    rep << cut.to_text();
    rep << "random_mean_cut_weight = " << format_double(random_cut) << '\n';
    rep << "assert balanced = " << (balanced ? "PASS" : "FAIL") << '\n';
    rep << "assert cut_below_random_mean = " << (cut.cut_weight < random_cut ? "PASS" : "FAIL") << '\n';
    write_file(dir / "placement.txt", rep.str());
    ok = ok && balanced && cut.cut_weight < random_cut;
    out << "place: cut " << format_double(cut.cut_weight) << " (random mean " << format_double(random_cut) << ")\n";
  }

  if (cost) {
    const auto report = cost_report(rt.trace(), assignment, rt.cost_model());
    const double random_mean = mean_random_cost(rt.trace(), view, c.k, c.seed, kRandomSamples, rt.cost_model());
    const bool lower = static_cast<double>(report.total_ns) < random_mean;
    std::ostringstream rep;
    rep << config_header(c, "cost");
    rep << "demo_days = " << kDemoDays << '\n';
    rep << "trace_events = " << rt.trace().events.size() << '\n';
    rep << "charge_local_ref_ns = " << rt.cost_model().local_ref << '\n';
    rep << "charge_cross_silo_rtt_ns = " << rt.cost_model().cross_silo_rtt << '\n';
    rep << "charge_disk_seek_ns = " << rt.cost_model().disk_seek << '\n';
    rep << "charge_net_1k_ns = " << rt.cost_model().net_1k << '\n';
    rep << "[partitioned]\n" << report.to_text();
    rep << "[random]\nmean_total_ns = " << format_double(random_mean) << '\n';
    rep << "assert partitioned_below_random_mean = " << (lower ? "PASS" : "FAIL") << '\n';
    write_file(dir / "cost.txt", rep.str());
    std::ostringstream log;
    demo.log->write(log);
    write_file(dir / "action_log.tsv", log.str());
    ok = ok && lower;
    out << "cost: partitioned " << report.total_ns << " ns (random mean " << format_double(random_mean) << " ns)\n";
  }
  return ok;
}

int cmd_all(const RunConfig& rc, std::ostream& out) {
  auto c = scenario_config(rc);
  const auto dir = std::filesystem::path(rc.output_dir);
  reset_op_counts();
  bool ok = true;
  std::ostringstream summary;
  summary << config_header(c, "all");
  for (const auto& name : scenario_names()) {
    const bool passed = write_scenario(c, name, dir, out);
    summary << "scenario " << name << " = " << (passed ? "PASS" : "FAIL") << '\n';
    ok = ok && passed;
  }
  const auto gaps = coverage_gaps(op_counts());
  summary << "assert scenarios_cover_public_operations = " << (gaps.empty() ? "PASS" : "FAIL") << '\n';
  for (const auto& g : gaps) summary << "uncovered " << g << '\n';
  ok = ok && gaps.empty();
  const bool placement_ok = write_placement_and_cost(c, dir, true, true, out);
  summary << "placement_and_cost = " << (placement_ok ? "PASS" : "FAIL") << '\n';
  ok = ok && placement_ok;
  summary << "result = " << (ok ? "PASS" : "FAIL") << '\n';
  write_file(dir / "summary.txt", summary.str());
  out << "all: " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kOk : kAssertionFailure;
}

void add_common(CLI::App& sub, RunConfig& rc) {
  sub.add_option("--spec", rc.spec_path, "Grid spec file (default: built-in demo grid)");
  sub.add_option("--k", rc.k, "Number of silos")->check(CLI::PositiveNumber);
  sub.add_option("--balance-tol", rc.balance_tol, "Balance tolerance")->check(CLI::NonNegativeNumber);
  sub.add_option("--seed", rc.seed, "Random seed");
  sub.add_option("--out", rc.output_dir, "Output directory");
  sub.add_option("--hot-min", rc.hot_min, "Intensity at or above which context is hot");
  sub.add_option("--cold-max", rc.cold_max, "Intensity at or below which context is cold");
  sub.add_option("--half-life", rc.half_life_h, "Access counter half-life in hours");
  sub.add_option("--config", rc.config_path, "Run config file; flags win on conflict");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"gova: graph of virtual actors over a simulated distribution grid"};
  app.require_subcommand(1);
  auto* build = app.add_subcommand("build", "Build the grid and write graph.txt");
  auto* scenario = app.add_subcommand("scenario", "Run one scenario");
  auto* place = app.add_subcommand("place", "Partition the demo grid into silos");
  auto* cost = app.add_subcommand("cost", "Compare simulated latency of partitioned vs random placement");
  auto* all = app.add_subcommand("all", "Run every scenario plus placement and cost reports");
  for (auto* sub : {build, scenario, place, cost, all}) add_common(*sub, rc);
  scenario->add_option("--name", rc.name, "context | relationship | identity | behavior");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  CLI::App* sub = app.get_subcommands().front();
  rc.command = sub->get_name();
  try {
    apply_config_file(rc, *sub);
    if (rc.command != "build" && !rc.seed) throw UsageError("--seed is required for " + rc.command);
    if (rc.command == "scenario" && rc.name.empty()) throw UsageError("--name is required for scenario");
    std::filesystem::create_directories(rc.output_dir);

    if (rc.command == "build") return cmd_build(rc, out);
    if (rc.command == "scenario") {
      auto c = scenario_config(rc);
      return write_scenario(c, rc.name, rc.output_dir, out) ? kOk : kAssertionFailure;
    }
    if (rc.command == "place" || rc.command == "cost") {
      auto c = scenario_config(rc);
      const bool ok = write_placement_and_cost(c, rc.output_dir, rc.command == "place", rc.command == "cost", out);
      return ok ? kOk : kAssertionFailure;
    }
    return cmd_all(rc, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  } catch (const Error& e) {
    err << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::InvalidSpec:
      case ErrorCode::ParseError:
      case ErrorCode::UnknownScenario:
      case ErrorCode::InvalidArgument:
        return kUsageError;
      default:
        return kAssertionFailure;
    }
  }
}

}  // namespace gova
