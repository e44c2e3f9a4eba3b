#include "gova/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace gova {

void ScenarioReport::check(std::string assertion, bool ok, std::string detail) {
  assertions.push_back({std::move(assertion), ok, std::move(detail)});
}

void ScenarioReport::metric(std::string key, const std::string& value) { metrics.emplace_back(std::move(key), value); }
void ScenarioReport::metric(std::string key, double value) { metrics.emplace_back(std::move(key), format_double(value)); }
void ScenarioReport::metric(std::string key, std::int64_t value) {
  metrics.emplace_back(std::move(key), std::to_string(value));
}

bool ScenarioReport::passed() const { return failed_count() == 0; }

std::size_t ScenarioReport::failed_count() const {
  return static_cast<std::size_t>(std::count_if(assertions.begin(), assertions.end(), [](const auto& a) { return !a.passed; }));
}

std::string ScenarioReport::to_text() const {
  std::ostringstream out;
  out << "scenario = " << name << '\n';
  for (const auto& [k, v] : config) out << "config." << k << " = " << v << '\n';
  for (const auto& a : assertions) {
    out << "assert " << a.name << " = " << (a.passed ? "PASS" : "FAIL");
    if (!a.detail.empty()) out << " (" << a.detail << ')';
    out << '\n';
  }
  for (const auto& [k, v] : metrics) out << "metric " << k << " = " << v << '\n';
  out << "assertions_passed = " << assertions.size() - failed_count() << '\n';
  out << "assertions_failed = " << failed_count() << '\n';
  out << "result = " << (passed() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"context", "relationship", "identity", "behavior"};
  return names;
}

const std::vector<std::string>& required_ops() {
  static const std::vector<std::string> ops{
      "runtime.spawn",          "runtime.send",
      "runtime.dispatch",       "runtime.deactivate_idle",
      "runtime.activate",       "runtime.persist_snapshot",
      "context.put",            "context.get",
      "context.record_access",  "context.classify_temperature",
      "context.maintain",       "context.downsample",
      "graph.add_edge",         "graph.end_edge",
      "graph.neighbors",        "graph.traverse",
      "graph.find_service",     "graph.subscribe",
      "graph.subscribers_of",   "graph.snapshot_at",
      "placement.partition",    "placement.cut_weight",
      "placement.rebalance",    "propagation.publish",
      "propagation.propagate_topology_change", "propagation.reaggregate",
  };
  return ops;
}

std::vector<std::string> coverage_gaps(const std::map<std::string, std::uint64_t>& counts) {
  std::vector<std::string> out;
  for (const auto& op : required_ops()) {
    auto it = counts.find(op);
    if (it == counts.end() || it->second == 0) out.push_back(op);
  }
  return out;
}

double mean_random_cost(const MessageTrace& trace, const GraphView& view, int k, std::uint64_t seed, int samples,
                        const CostModel& model) {
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    auto a = random_balanced_assignment(view, k, mix_seed(seed, "random/" + std::to_string(i)));
    total += static_cast<double>(cost_report(trace, a, model).total_ns);
  }
  return total / samples;
}

namespace {

RuntimeOptions runtime_options(const ScenarioConfig& c) {
  RuntimeOptions o;
  o.context.thresholds = c.thresholds;
  o.context.default_half_life = c.half_life;
  return o;
}

ScenarioReport make_report(const std::string& name, const ScenarioConfig& c) {
  ScenarioReport r;
  r.name = name;
  r.config = {
      {"seed", std::to_string(c.seed)},
      {"k", std::to_string(c.k)},
      {"balance_tol", format_double(c.balance_tol)},
      {"hot_min", format_double(c.thresholds.hot_min)},
      {"cold_max", format_double(c.thresholds.cold_max)},
      {"half_life_h", format_double(static_cast<double>(c.half_life) / static_cast<double>(kHour))},
      {"feeders", std::to_string(c.grid.feeders)},
      {"meters_per_feeder", std::to_string(c.grid.meters_per_feeder)},
      {"tie_switches", std::to_string(c.grid.tie_switches.size())},
      {"weather_stations", std::to_string(c.grid.weather_stations.size())},
      {"days", std::to_string(c.grid.days)},
      {"dr_factor", format_double(c.grid.dr_factor)},
  };
  for (const auto& kv : c.echo) r.config.push_back(kv);
  return r;
}

bool close_rel(double a, double b, double tol = 1e-9) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

std::string count_detail(std::size_t ok, std::size_t total) {
  return std::to_string(ok) + "/" + std::to_string(total);
}

// Hourly driver shared by the scenarios. Per simulated hour T: scripted
// actions run at T, weather samples at T+1, meter readings at T+2.
struct Sim {
  const ScenarioConfig& cfg;
  int days;
  std::unique_ptr<ActorRuntime> rt;
  std::unique_ptr<ActionLog> log;
  std::unique_ptr<Propagator> prop;
  Grid grid;
  std::map<std::string, TimeSeriesSegment> weather;
  std::map<std::string, Tick> period;
  std::map<ActorId, TimeSeriesSegment> load;  // consumption before any DR response
  bool readings = true;
  std::function<void(Tick)> scripted;
  std::function<double(const ActorId&, Tick, double)> adjust;
  std::map<std::string, std::int64_t> maintenance;
  std::int64_t deactivations = 0;

  Sim(const ScenarioConfig& c, int horizon_days)
      : cfg(c),
        days(horizon_days),
        rt(std::make_unique<ActorRuntime>(runtime_options(c))),
        log(std::make_unique<ActionLog>()),
        prop(std::make_unique<Propagator>(*rt, *log)) {
    grid = build_grid(*rt, c.grid);
    for (const auto& w : c.grid.weather_stations) add_station(w);
    for (int f = 0; f < c.grid.feeders; ++f) {
      const auto nearby = rt->graph().neighbors(grid.substations[f], rel::kNearby, 0);
      const auto& wx = weather.at(nearby.front().local_id);
      for (const auto& m : grid.feeder_meters[f]) load.emplace(m, synth_consumption(m, wx, c.grid.consumption, c.seed));
    }
  }

  void add_station(const StationSpec& w) {
    weather[w.name] = synth_weather(w.name, days, cfg.seed);
    period[w.name] = w.sampling_period;
  }

  [[nodiscard]] double physical(const ActorId& m, std::size_t h) const {
    const double v = load.at(m).samples.at(h);
    return adjust ? adjust(m, static_cast<Tick>(h) * kHour, v) : v;
  }

  void daily(Tick T) {
    auto rep = rt->context().maintain(T);
    for (const char* verb : {"delete", "demote", "compress", "downsample", "evict"}) {
      maintenance[verb] += static_cast<std::int64_t>(rep.count(verb));
    }
    deactivations += static_cast<std::int64_t>(rt->deactivate_idle(12 * kHour).size());
    for (const auto& [name, p] : period) {
      const auto id = station_id(name);
      if (!rt->exists(id) || rt->graph().node(id).since > T - kDay) continue;
      const Tick res = std::max(p, kHour);
      rt->send(kSystemActor, id, Message{"daily_summary", {{"start", T - kDay}, {"end", T}, {"resolution", res}}});
    }
  }

  void run() {
    const int hours = days * 24;
    for (int h = 0; h < hours; ++h) {
      const Tick T = static_cast<Tick>(h) * kHour;
      rt->schedule(T, [this, T] {
        if (T > 0 && T % kDay == 0) daily(T);
        if (scripted) scripted(T);
      });
      rt->schedule(T + 1, [this, T, h] {
        for (const auto& [name, series] : weather) {
          const auto id = station_id(name);
          if (!rt->exists(id) || T % std::max(period.at(name), kHour) != 0) continue;
          rt->send(kSystemActor, id, Message{"sample", {{"t", T}, {"temp", series.samples.at(h)}}});
        }
      });
      if (readings) {
        rt->schedule(T + 2, [this, T, h] {
          for (const auto& m : grid.meters) {
            rt->send(kSystemActor, m, Message{"reading", {{"t", T}, {"kwh", physical(m, static_cast<std::size_t>(h))}}});
          }
        });
      }
      rt->run_until(T + kHour - 1);
    }
    rt->run_until(static_cast<Tick>(days) * kDay);
  }

  void common_metrics(ScenarioReport& r) const {
    r.metric("actors", static_cast<std::int64_t>(rt->actor_count()));
    r.metric("edge_records", static_cast<std::int64_t>(rt->graph().edges().size()));
    r.metric("messages_delivered", static_cast<std::int64_t>(rt->delivered_count()));
    r.metric("trace_events", static_cast<std::int64_t>(rt->trace().events.size()));
    r.metric("context_records", static_cast<std::int64_t>(rt->context().record_count()));
    r.metric("hot_bytes", static_cast<std::int64_t>(rt->context().hot_bytes()));
    for (const auto& [verb, n] : maintenance) r.metric("maintenance_" + verb, n);
    r.metric("deactivations", deactivations);
    r.metric("action_log_entries", static_cast<std::int64_t>(log->size()));
  }

  void check_failures(ScenarioReport& r) const {
    const auto& f = rt->failures();
    r.check("no_dispatch_failures", f.empty(), f.empty() ? std::string{} : f.front().what);
    r.check("state_ownership_respected", rt->ownership_violations() == 0);
  }
};

// Switch state timeline replayed from the action log.
SwitchState logged_state(const ActionLog& log, const ActorId& sw, Tick t) {
  SwitchState s = SwitchState::Open;
  for (const auto& e : log.entries()) {
    if (e.action == action::kSwitchToggle && e.actor == sw && e.t <= t) s = parse_switch_state(e.params.at("state"));
  }
  return s;
}

// Plain BFS over the feeds edges of a frozen view.
std::set<ActorId> bfs_feeds(const GraphView& view, const ActorId& origin) {
  std::map<ActorId, std::vector<ActorId>> adj;
  for (const auto& e : view.edges()) {
    if (e.type == rel::kFeeds) adj[e.src].push_back(e.dst);
  }
  std::set<ActorId> seen{origin};
  std::deque<ActorId> q{origin};
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (const auto& v : adj[u]) {
      if (seen.insert(v).second) q.push_back(v);
    }
  }
  return seen;
}

}  // namespace

ScenarioReport scenario_context(const ScenarioConfig& cfg) {
  auto r = make_report("context", cfg);
  if (cfg.grid.tie_switches.empty()) throw Error(ErrorCode::InvalidSpec, "context scenario needs a tie switch");
  if (cfg.grid.days <= 30) throw Error(ErrorCode::InvalidSpec, "context scenario needs more than 30 days");
  Sim sim(cfg, cfg.grid.days);
  auto& rt = *sim.rt;
  const Tick toggle_t = 30 * kDay;
  const Tick end = static_cast<Tick>(sim.days) * kDay;
  const auto& sw = sim.grid.switches.front();

  CutReport cut;
  const auto assignment = partition(rt.graph().snapshot_at(0), cfg.k, placement_filter(), cfg.balance_tol, cfg.seed, &cut);
  rt.set_silos(assignment.silo_of);

  AffectedSet affected;
  sim.scripted = [&](Tick T) {
    if (T != toggle_t) return;
    affected = sim.prop->propagate_topology_change(sw, SwitchState::Closed, T);
    sim.prop->run_jobs();
  };
  sim.run();

  const auto F = static_cast<std::size_t>(cfg.grid.feeders);
  const auto H = static_cast<std::size_t>(sim.days) * 24;

  // Oracle: meter series + topology from the action log.
  std::vector<std::vector<double>> oracle(F, std::vector<double>(H, 0.0));
  std::map<ActorId, std::size_t> switch_index;
  for (std::size_t i = 0; i < sim.grid.switches.size(); ++i) switch_index.emplace(sim.grid.switches[i], i);
  for (std::size_t h = 0; h < H; ++h) {
    const Tick t = static_cast<Tick>(h) * kHour;
    std::vector<SwitchState> states;
    for (const auto& s : sim.grid.switches) states.push_back(logged_state(*sim.log, s, t));
    for (const auto& m : sim.grid.meters) {
      int f = sim.grid.home_feeder.at(m);
      if (auto b = sim.grid.block_of.find(m); b != sim.grid.block_of.end()) {
        const auto& tie = cfg.grid.tie_switches[b->second];
        f = states[b->second] == SwitchState::Closed ? tie.feeder_b : tie.feeder_a;
      }
      oracle[f][h] += sim.load.at(m).samples[h];
    }
  }
  if (cfg.corrupt_oracle) oracle[0][0] += 1.0;

  // Naive: current topology applied to every hour.
  std::vector<std::vector<double>> naive(F, std::vector<double>(H, 0.0));
  for (std::size_t f = 0; f < F; ++f) {
    for (const auto& id : rt.graph().traverse(sim.grid.substations[f], edge_type_is(std::string(rel::kFeeds)), end - 1)) {
      if (id.kind != kind::kMeter) continue;
      for (std::size_t h = 0; h < H; ++h) naive[f][h] += sim.load.at(id).samples[h];
    }
  }

  std::size_t naive_diff_pre = 0;
  double max_rel = 0.0;
  std::size_t missing = 0;
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t h = 0; h < H; ++h) {
      const Tick t = static_cast<Tick>(h) * kHour;
      if (t < toggle_t && !close_rel(naive[f][h], oracle[f][h])) ++naive_diff_pre;
      auto rec = rt.context().peek(sim.grid.substations[f], kAggregateKey, t);
      const Scalar* s = rec ? std::get_if<Scalar>(&rec->value) : nullptr;
      if (s == nullptr || rec->timestamp != t) {
        ++missing;
        continue;
      }
      if (oracle[f][h] != 0.0) {
        max_rel = std::max(max_rel, std::abs(s->value - oracle[f][h]) / std::abs(oracle[f][h]));
      } else if (s->value != 0.0) {
        max_rel = std::numeric_limits<double>::infinity();
      }
    }
  }
  r.check("naive_diverges_before_toggle", naive_diff_pre >= 1, "hours=" + std::to_string(naive_diff_pre));
  r.check("reaggregated_matches_oracle", missing == 0 && max_rel <= 1e-9,
          "max_rel_err=" + format_double(max_rel) + " missing=" + std::to_string(missing));

  // Affected set against an independent BFS over frozen views.
  const auto before = rt.graph().snapshot_at(toggle_t - 1);
  const auto after = rt.graph().snapshot_at(toggle_t);
  AffectedSet expected;
  for (const auto& sub : sim.grid.substations) {
    auto a = bfs_feeds(before, sub);
    auto b = bfs_feeds(after, sub);
    std::vector<ActorId> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
    for (const auto& id : diff) {
      if (id.kind != kind::kMeter) continue;
      expected.meters.insert(id);
      expected.substations.insert(sub);
    }
  }
  r.check("affected_set_matches_bfs_oracle",
          affected.meters == expected.meters && affected.substations == expected.substations,
          "meters=" + std::to_string(affected.meters.size()) + " substations=" + std::to_string(affected.substations.size()));
  r.check("jobs_cover_affected_substations", sim.prop->completed_jobs().size() == affected.substations.size());

  // Idempotence of re-aggregation.
  const auto& target = sim.grid.substations.front();
  const auto first = sim.prop->reaggregate(target, 0, toggle_t);
  const auto second = sim.prop->reaggregate(target, 0, toggle_t);
  r.check("reaggregation_idempotent", encode_value(first) == encode_value(second));

  // Action completeness and replay.
  r.check("action_log_matches_mutations", sim.log->count(action::kSwitchToggle) == 1 && sim.log->size() == 1);
  {
    ActorRuntime fresh;
    build_grid(fresh, cfg.grid);
    for (const auto& e : sim.log->entries()) apply_switch_action(fresh.graph(), e);
    auto open_feeds = [](const GraphRegistry& g) {
      std::set<std::pair<ActorId, ActorId>> s;
      for (const auto& e : g.edges()) {
        if (e.type == rel::kFeeds && e.is_open()) s.emplace(e.src, e.dst);
      }
      return s;
    };
    r.check("action_log_replays_topology", open_feeds(fresh.graph()) == open_feeds(rt.graph()));
  }
  sim.check_failures(r);

  r.metric("cut_weight", cut.cut_weight);
  for (std::size_t s = 0; s < cut.silo_sizes.size(); ++s) {
    r.metric("silo_" + std::to_string(s) + "_size", static_cast<std::int64_t>(cut.silo_sizes[s]));
  }
  const auto cost = cost_report(rt.trace(), assignment, rt.cost_model());
  r.metric("simulated_latency_ns", cost.total_ns);
  r.metric("local_messages", static_cast<std::int64_t>(cost.local_messages));
  r.metric("cross_messages", static_cast<std::int64_t>(cost.cross_messages));
  r.metric("affected_meters", static_cast<std::int64_t>(affected.meters.size()));
  r.metric("naive_mismatched_hours_before_toggle", static_cast<std::int64_t>(naive_diff_pre));
  r.metric("max_rel_err", max_rel);
  r.metric("missing_aggregate_hours", static_cast<std::int64_t>(missing));
  sim.common_metrics(r);
  return r;
}

ScenarioReport scenario_relationship(const ScenarioConfig& cfg) {
  auto r = make_report("relationship", cfg);
  if (cfg.grid.days <= 45) throw Error(ErrorCode::InvalidSpec, "relationship scenario needs more than 45 days");
  Sim sim(cfg, cfg.grid.days);
  sim.readings = false;
  auto& rt = *sim.rt;
  const Tick insert_t = 45 * kDay;
  const int target_feeder = std::min(1, cfg.grid.feeders - 1);
  const auto anchor = substation_geo(target_feeder);
  StationSpec fresh{"w" + std::to_string(cfg.grid.weather_stations.size()), {anchor.lat, anchor.lon + 0.01}, kHour};
  while (sim.weather.contains(fresh.name)) fresh.name += "x";
  sim.add_station(fresh);

  sim.scripted = [&](Tick T) {
    if (T != insert_t) return;
    Attributes attrs{{"lat", fresh.geo.lat}, {"lon", fresh.geo.lon}, {"sampling_period_h", 1.0}};
    rt.spawn(kind::kStation, fresh.name, {}, std::move(attrs));
    for (const auto& sub : sim.grid.substations) rt.send(kSystemActor, sub, Message{"resolve_nearby", {{"t", T}}});
    rt.drain();
    for (const auto& sub : sim.grid.substations) {
      const auto current = rt.graph().neighbors(sub, rel::kNearby, T);
      for (const auto& [name, p] : sim.period) {
        const auto st = station_id(name);
        if (std::find(current.begin(), current.end(), st) == current.end()) {
          rt.graph().unsubscribe(sub, st, kTemperatureKey);
        } else {
          rt.graph().subscribe(sub, st, kTemperatureKey);
        }
      }
    }
  };
  sim.run();

  std::vector<StationSpec> stations = cfg.grid.weather_stations;
  auto sample_of = [&](const std::string& station, Tick t) {
    const Tick p = std::max(sim.period.at(station), kHour);
    return sim.weather.at(station).samples.at(static_cast<std::size_t>(t / p * p / kHour));
  };
  auto nearest = [&](int f, Tick t) {
    std::string best;
    double best_km = std::numeric_limits<double>::infinity();
    auto consider = [&](const StationSpec& w) {
      const double km = haversine_km(substation_geo(f), w.geo);
      if (km < best_km || (km == best_km && w.name < best)) {
        best_km = km;
        best = w.name;
      }
    };
    for (const auto& w : stations) consider(w);
    if (t >= insert_t) consider(fresh);
    return best;
  };

  const auto H = static_cast<std::size_t>(sim.days) * 24;
  std::size_t total = 0, matched = 0, edge_ok = 0, static_mismatch_after = 0, switched = 0;
  bool corrupted = false;
  for (int f = 0; f < cfg.grid.feeders; ++f) {
    const auto& sub = sim.grid.substations[f];
    std::vector<EdgeRecord> nearby;
    for (const auto& e : rt.graph().edges()) {
      if (e.type == rel::kNearby && e.src == sub) nearby.push_back(e);
    }
    std::string initial;
    for (const auto& e : nearby) {
      if (e.valid_at(0)) initial = e.dst.local_id;
    }
    if (nearest(f, insert_t) != nearest(f, 0)) ++switched;
    for (std::size_t h = 0; h < H; ++h) {
      const Tick t = static_cast<Tick>(h) * kHour;
      std::vector<std::string> valid;
      for (const auto& e : nearby) {
        if (e.valid_at(t)) valid.push_back(e.dst.local_id);
      }
      ++total;
      if (valid.size() == 1 && valid.front() == nearest(f, t)) ++edge_ok;
      auto rec = rt.context().peek(sub, kTemperatureFeatureKey, t);
      const Scalar* s = rec ? std::get_if<Scalar>(&rec->value) : nullptr;
      if (s == nullptr || valid.size() != 1) continue;
      double expected = sample_of(valid.front(), t);
      if (cfg.corrupt_oracle && !corrupted) {
        expected += 1.0;
        corrupted = true;
      }
      if (s->value == expected) ++matched;
      if (t >= insert_t && s->value != sample_of(initial, t)) ++static_mismatch_after;
    }
  }
  r.check("feature_matches_interval_join", matched == total, count_detail(matched, total));
  r.check("nearby_edges_match_distance_oracle", edge_ok == total, count_detail(edge_ok, total));
  r.check("static_baseline_mismatches_after_insertion", static_mismatch_after > 0,
          "hours=" + std::to_string(static_mismatch_after));
  r.check("some_substation_switched_station", switched > 0, "substations=" + std::to_string(switched));
  sim.check_failures(r);
  r.metric("substation_hours", static_cast<std::int64_t>(total));
  r.metric("static_mismatched_hours", static_cast<std::int64_t>(static_mismatch_after));
  sim.common_metrics(r);
  return r;
}

ScenarioReport scenario_identity(const ScenarioConfig& cfg) {
  auto r = make_report("identity", cfg);
  if (cfg.grid.days <= 40) throw Error(ErrorCode::InvalidSpec, "identity scenario needs more than 40 days");
  Sim sim(cfg, cfg.grid.days);
  auto& rt = *sim.rt;
  const Tick change_t = 40 * kDay;
  const auto target = sim.grid.meters.at(std::min<std::size_t>(7, sim.grid.meters.size() - 1));
  const auto new_consumer = consumer_id("c-" + target.local_id + "-b");
  const double new_scale = 1.8;
  auto original_consumer = [](const ActorId& m) { return consumer_id("c-" + m.local_id); };
  auto original_location = [](const ActorId& m) { return "site-" + m.local_id; };
  const std::string new_location = "site-" + target.local_id + "-relocated";

  const auto base = rt.graph().snapshot_at(0);
  auto assignment = partition(base, cfg.k, placement_filter(), cfg.balance_tol, cfg.seed);
  ViewDelta delta;
  for (const auto& m : sim.grid.meters) {
    const auto c = original_consumer(m);
    rt.spawn(kind::kConsumer, c.local_id, {{"name", c.local_id}});
    const auto& e = rt.graph().add_edge(m, c, rel::kMeasures, 1.0, 0);
    delta.added_nodes.push_back(rt.graph().node(c));
    delta.added_edges.push_back(e);
    rt.send(kSystemActor, m, Message{"set_location", {{"location", original_location(m)}, {"t", Tick{0}}}});
  }
  rt.drain();
  CutReport seeded, moved;
  rebalance(base, assignment, delta, 0, placement_filter(), cfg.balance_tol, &seeded);
  assignment = rebalance(base, assignment, delta, 200, placement_filter(), cfg.balance_tol, &moved);
  rt.set_silos(assignment.silo_of);
  r.check("rebalance_reduces_cut", moved.cut_weight < seeded.cut_weight,
          format_double(seeded.cut_weight) + " -> " + format_double(moved.cut_weight));
  r.check("rebalance_keeps_balance", is_balanced(assignment, base.node_count() + delta.added_nodes.size(), cfg.balance_tol));

  sim.adjust = [&](const ActorId& m, Tick t, double v) { return m == target && t >= change_t ? v * new_scale : v; };
  sim.scripted = [&](Tick T) {
    if (T != change_t) return;
    const auto view = rt.graph().snapshot_at(T);
    const auto old_edge = rt.graph().open_edge(target, original_consumer(target), rel::kMeasures);
    rt.spawn(kind::kConsumer, new_consumer.local_id, {{"name", new_consumer.local_id}});
    rt.send(kSystemActor, target, Message{"reassign", {{"consumer", new_consumer.str()}, {"t", T}}});
    rt.send(kSystemActor, target, Message{"set_location", {{"location", new_location}, {"t", T}}});
    rt.drain();
    ViewDelta d;
    d.added_nodes.push_back(rt.graph().node(new_consumer));
    d.added_edges.push_back(*rt.graph().open_edge(target, new_consumer, rel::kMeasures));
    if (old_edge) d.removed_edges.push_back(*old_edge);
    assignment = rebalance(view, assignment, d, 10, placement_filter(), cfg.balance_tol);
    rt.set_silos(assignment.silo_of);
  };
  sim.run();

  const auto H = static_cast<std::size_t>(sim.days) * 24;
  auto oracle_consumer = [&](const ActorId& m, Tick t) {
    return m == target && t >= change_t ? new_consumer : original_consumer(m);
  };
  auto oracle_location = [&](const ActorId& m, Tick t) {
    return m == target && t >= change_t ? new_location : original_location(m);
  };

  std::size_t total = 0, ok = 0;
  bool corrupted = false;
  for (const auto& m : sim.grid.meters) {
    for (std::size_t h = 0; h < H; ++h) {
      const Tick t = static_cast<Tick>(h) * kHour;
      ++total;
      auto rec = rt.context().peek(m, kConsumptionKey, t);
      const Scalar* s = rec ? std::get_if<Scalar>(&rec->value) : nullptr;
      if (s == nullptr || rec->timestamp != t || s->value != sim.physical(m, h)) continue;
      const auto consumers = rt.graph().neighbors(m, rel::kMeasures, t);
      const auto loc = rt.context().get(m, kLocationKey, t, "billing");
      const Blob* blob = std::get_if<Blob>(&loc.value);
      auto expected_loc = oracle_location(m, t);
      if (cfg.corrupt_oracle && !corrupted) {
        expected_loc += "?";
        corrupted = true;
      }
      if (consumers.size() == 1 && consumers.front() == oracle_consumer(m, t) && blob && blob->bytes == expected_loc) ++ok;
    }
  }
  r.check("readings_carry_as_of_metadata", ok == total, count_detail(ok, total));

  // Per-consumer baselines against a filtered mean over the scripted intervals.
  const Tick end = static_cast<Tick>(sim.days) * kDay;
  std::map<ActorId, std::pair<std::array<double, 24>, std::array<std::size_t, 24>>> acc;
  for (const auto& m : sim.grid.meters) {
    for (std::size_t h = 0; h < H; ++h) {
      auto& [sum, n] = acc[oracle_consumer(m, static_cast<Tick>(h) * kHour)];
      sum[h % 24] += sim.physical(m, h);
      ++n[h % 24];
    }
  }
  std::size_t consumers_ok = 0;
  for (const auto& [c, sn] : acc) {
    const auto got = consumer_baseline(rt, c, 0, end);
    bool same = true;
    for (std::size_t h = 0; h < 24; ++h) same = same && sn.second[h] > 0 && close_rel(got[h], sn.first[h] / sn.second[h]);
    if (same) ++consumers_ok;
  }
  r.check("consumer_baselines_use_own_segment", consumers_ok == acc.size(), count_detail(consumers_ok, acc.size()));

  const auto before = consumer_baseline(rt, original_consumer(target), 0, end);
  const auto after = consumer_baseline(rt, new_consumer, 0, end);
  double max_gap = 0.0;
  for (std::size_t h = 0; h < 24; ++h) max_gap = std::max(max_gap, std::abs(after[h] - before[h]));
  r.check("identity_segments_differ", max_gap > 0.0, "max_hourly_gap=" + format_double(max_gap));
  sim.check_failures(r);
  r.metric("readings_checked", static_cast<std::int64_t>(total));
  r.metric("consumers", static_cast<std::int64_t>(acc.size()));
  r.metric("rebalance_cut_seeded", seeded.cut_weight);
  r.metric("rebalance_cut_moved", moved.cut_weight);
  sim.common_metrics(r);
  return r;
}

ScenarioReport scenario_behavior(const ScenarioConfig& cfg) {
  auto r = make_report("behavior", cfg);
  constexpr int kDays = 14;
  Sim sim(cfg, kDays);
  auto& rt = *sim.rt;
  const double factor = cfg.grid.dr_factor;
  const int per_feeder = std::min(10, cfg.grid.meters_per_feeder);
  std::vector<ActorId> dr_meters;
  for (const auto& fm : sim.grid.feeder_meters) dr_meters.insert(dr_meters.end(), fm.begin(), fm.begin() + per_feeder);
  std::set<Tick> events;
  for (int d = 2; d <= 11; ++d) events.insert(static_cast<Tick>(d) * kDay + 18 * kHour);

  std::set<std::pair<ActorId, Tick>> issued;
  sim.scripted = [&](Tick T) {
    if (!events.contains(T)) return;
    for (const auto& m : dr_meters) {
      issue_dr_command(rt, *sim.log, m, factor, T, T + kHour);
      issued.emplace(m, T);
    }
  };
  sim.run();

  std::size_t logged_once = 0;
  for (const auto& [m, T] : issued) {
    auto n = std::count_if(sim.log->entries().begin(), sim.log->entries().end(), [&](const auto& e) {
      return e.action == action::kDrCommand && e.actor == m && e.params.at("start") == std::to_string(T);
    });
    if (n == 1) ++logged_once;
  }
  r.check("action_log_has_every_command", sim.log->size() == issued.size() && logged_once == issued.size(),
          "logged=" + std::to_string(sim.log->size()) + " issued=" + std::to_string(issued.size()));

  const Tick end = static_cast<Tick>(kDays) * kDay;
  const std::size_t H = kDays * 24;
  std::size_t baseline_ok = 0, contaminated_ok = 0, response_ok = 0;
  double min_ratio = std::numeric_limits<double>::infinity();
  bool corrupted = false;
  for (const auto& m : dr_meters) {
    auto series = rt.context().series(m, kConsumptionKey, 0, end, kHour);
    const auto clean = baseline_excluding_actions(series, *sim.log, m);
    std::array<double, 24> sum{}, naive_sum{};
    std::array<std::size_t, 24> n{}, naive_n{};
    bool responded = true;
    for (std::size_t h = 0; h < H; ++h) {
      const Tick t = static_cast<Tick>(h) * kHour;
      const double physical = sim.load.at(m).samples[h];
      naive_sum[h % 24] += series.samples[h];
      ++naive_n[h % 24];
      if (events.contains(t)) {
        responded = responded && series.samples[h] == physical * factor;
        continue;
      }
      sum[h % 24] += physical;
      ++n[h % 24];
    }
    if (responded) ++response_ok;
    bool same = true;
    for (std::size_t h = 0; h < 24; ++h) {
      double expected = sum[h] / static_cast<double>(n[h]);
      if (cfg.corrupt_oracle && !corrupted) {
        expected += 1.0;
        corrupted = true;
      }
      same = same && close_rel(clean[h], expected);
    }
    if (same) ++baseline_ok;
    const double naive18 = naive_sum[18] / static_cast<double>(naive_n[18]);
    const double threshold = 0.5 * (1.0 - factor) * clean[18];
    const double deviation = std::abs(naive18 - clean[18]);
    if (threshold > 0) min_ratio = std::min(min_ratio, deviation / threshold);
    if (deviation > threshold) ++contaminated_ok;
  }
  r.check("meters_respond_to_commands", response_ok == dr_meters.size(), count_detail(response_ok, dr_meters.size()));
  r.check("baseline_excluding_actions_matches_filtered_mean", baseline_ok == dr_meters.size(),
          count_detail(baseline_ok, dr_meters.size()));
  r.check("contaminated_baseline_exceeds_half_effect", contaminated_ok == dr_meters.size(),
          count_detail(contaminated_ok, dr_meters.size()));
  sim.check_failures(r);
  r.metric("dr_meters", static_cast<std::int64_t>(dr_meters.size()));
  r.metric("event_hours", static_cast<std::int64_t>(events.size()));
  r.metric("commands_issued", static_cast<std::int64_t>(issued.size()));
  r.metric("min_deviation_over_threshold", min_ratio);
  sim.common_metrics(r);
  return r;
}

ScenarioReport run_scenario(const std::string& name, const ScenarioConfig& config) {
  if (name == "context") return scenario_context(config);
  if (name == "relationship") return scenario_relationship(config);
  if (name == "identity") return scenario_identity(config);
  if (name == "behavior") return scenario_behavior(config);
  throw Error(ErrorCode::UnknownScenario, name);
}

DemoRun run_demo(const ScenarioConfig& config, int days) {
  Sim sim(config, days);
  if (!sim.grid.switches.empty() && days > 3) {
    const auto sw = sim.grid.switches.front();
    sim.scripted = [&sim, sw](Tick T) {
      if (T != 3 * kDay) return;
      sim.prop->propagate_topology_change(sw, SwitchState::Closed, T);
      sim.prop->run_jobs();
    };
  }
  sim.run();
  DemoRun out;
  out.end = static_cast<Tick>(days) * kDay;
  out.grid = std::move(sim.grid);
  sim.prop.reset();
  out.runtime = std::move(sim.rt);
  out.log = std::move(sim.log);
  return out;
}

}  // namespace gova
