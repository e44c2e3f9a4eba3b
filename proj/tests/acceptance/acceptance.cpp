// Acceptance harness: one PASS/FAIL line per criterion.
// Usage: gova_acceptance <path to gova CLI> <scratch dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gova/actor_runtime.hpp"
#include "gova/context_store.hpp"
#include "gova/graph_registry.hpp"
#include "gova/placement.hpp"
#include "gova/scenarios.hpp"
#include "gova/smartgrid.hpp"

namespace fs = std::filesystem;
using namespace gova;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) { return format_double(v); }

const Assertion* find_assertion(const ScenarioReport& r, const std::string& name) {
  for (const auto& a : r.assertions) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::optional<std::string> find_metric(const ScenarioReport& r, const std::string& key) {
  for (const auto& [k, v] : r.metrics) {
    if (k == key) return v;
  }
  return std::nullopt;
}

// Every named assertion present and passing, and the report as a whole passing.
Outcome require(const ScenarioReport& r, const std::vector<std::string>& names) {
  Outcome o{true, {}};
  for (const auto& n : names) {
    const auto* a = find_assertion(r, n);
    if (a == nullptr || !a->passed) {
      o.pass = false;
      o.detail += n + (a ? " failed (" + a->detail + ") " : " missing ");
    } else if (!a->detail.empty()) {
      o.detail += n + " " + a->detail + "; ";
    }
  }
  if (!r.passed()) {
    o.pass = false;
    o.detail += "failed_assertions=" + std::to_string(r.failed_count());
  }
  return o;
}

// 1
Outcome context_correction() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = scenario_context(ScenarioConfig{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto o = require(r, {"reaggregated_matches_oracle", "naive_diverges_before_toggle"});
  const double max_rel = std::stod(find_metric(r, "max_rel_err").value_or("inf"));
  const long naive = std::stol(find_metric(r, "naive_mismatched_hours_before_toggle").value_or("0"));
  const long missing = std::stol(find_metric(r, "missing_aggregate_hours").value_or("1"));
  o.pass = o.pass && max_rel <= 1e-9 && naive >= 1 && missing == 0 && secs <= 60.0;
  o.detail = "max_rel_err=" + fmt(max_rel) + " naive_hours=" + std::to_string(naive) +
             " days=" + std::to_string(ScenarioConfig{}.grid.days) + " runtime_s=" + fmt(std::round(secs * 100) / 100);
  return o;
}

// 2
Outcome relationship() {
  return require(scenario_relationship(ScenarioConfig{}),
                 {"feature_matches_interval_join", "static_baseline_mismatches_after_insertion"});
}

// 3
Outcome identity() {
  return require(scenario_identity(ScenarioConfig{}),
                 {"readings_carry_as_of_metadata", "consumer_baselines_use_own_segment"});
}

// 4
Outcome behavior() {
  return require(scenario_behavior(ScenarioConfig{}),
                 {"action_log_has_every_command", "baseline_excluding_actions_matches_filtered_mean",
                  "contaminated_baseline_exceeds_half_effect"});
}

ActorId vid(int i) { return ActorId{"n", (i < 10 ? "0" : "") + std::to_string(i)}; }

GraphView view_of(int n, const std::vector<std::tuple<int, int, double>>& edges) {
  std::vector<NodeRecord> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back(NodeRecord{vid(i), {}, 0});
  std::vector<EdgeRecord> es;
  for (auto [a, b, w] : edges) es.push_back(EdgeRecord{vid(a), vid(b), "feeds", w, 0, kOpen});
  return GraphView(0, nodes, es);
}

// Exhaustive balanced bisection written independently of the library.
double bisection_optimum(int n, const std::vector<std::tuple<int, int, double>>& edges) {
  const int cap = (n + 1) / 2;
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1U << n); ++mask) {
    const int ones = __builtin_popcount(mask);
    if (ones > cap || n - ones > cap) continue;
    double cut = 0;
    for (auto [a, b, w] : edges) {
      if (((mask >> a) & 1U) != ((mask >> b) & 1U)) cut += w;
    }
    best = std::min(best, cut);
  }
  return best;
}

// 5
Outcome partition_quality() {
  std::mt19937_64 rng(5150);
  int worst_instance = -1;
  double worst_ratio = 0;
  bool ok = true;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 4 + static_cast<int>(rng() % 9);
    std::vector<std::tuple<int, int, double>> edges;
    std::bernoulli_distribution coin(0.2 + 0.4 * static_cast<double>(rng() % 100) / 100.0);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (coin(rng)) edges.emplace_back(a, b, 1.0 + static_cast<double>(rng() % 4));
      }
    }
    const auto view = view_of(n, edges);
    const auto a = partition(view, 2, {}, 0.0, static_cast<std::uint64_t>(inst));
    const double cut = cut_weight(view, a, {});
    const double opt = bisection_optimum(n, edges);
    const double lib_opt = brute_force_partition(view, 2, {}, 0.0).second;
    if (std::abs(opt - lib_opt) > 1e-9 || !is_balanced(a, static_cast<std::size_t>(n), 0.0)) ok = false;
    if (cut > 1.5 * opt + 1e-9) ok = false;
    const double ratio = opt > 0 ? cut / opt : (cut > 0 ? std::numeric_limits<double>::infinity() : 1.0);
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_instance = inst;
    }
  }
  const auto path = view_of(6, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 4, 1}, {4, 5, 1}});
  const auto k4 = view_of(4, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {1, 2, 1}, {1, 3, 1}, {2, 3, 1}});
  const double path_cut = cut_weight(path, partition(path, 2, {}, 0.0, 1), {});
  const double k4_cut = cut_weight(k4, partition(k4, 2, {}, 0.0, 1), {});
  ok = ok && path_cut == 1.0 && k4_cut == 4.0;
  return {ok, "instances=50 worst_ratio=" + fmt(worst_ratio) + " (instance " + std::to_string(worst_instance) +
                  ") path6_cut=" + fmt(path_cut) + " k4_cut=" + fmt(k4_cut)};
}

// Latency of a trace under an assignment, charged directly from the published table.
double direct_latency(const MessageTrace& trace, const Assignment& a) {
  double total = 0;
  for (const auto& ev : trace.events) {
    const int s = a.silo_of.at(trace.actors[ev.src]);
    const int d = a.silo_of.at(trace.actors[ev.dst]);
    if (ev.kind == TraceEvent::Kind::Message) {
      total += s == d ? 100.0 : 500'000.0;
    } else {
      total += 10'000'000.0 + 10'000.0 * std::ceil(static_cast<double>(ev.bytes) / 1024.0);
    }
  }
  return total;
}

// 6
Outcome placement_benefit() {
  ScenarioConfig cfg;
  auto demo = run_demo(cfg, 7);
  const auto& trace = demo.runtime->trace();
  const auto view = demo.runtime->graph().snapshot_at(demo.end);
  const auto a = partition(view, cfg.k, placement_filter(), cfg.balance_tol, cfg.seed);
  const auto report = cost_report(trace, a);
  const double partitioned = direct_latency(trace, a);
  double random_mean = 0;
  for (int i = 0; i < 100; ++i) {
    random_mean += direct_latency(trace, random_balanced_assignment(view, cfg.k, mix_seed(cfg.seed, "acceptance/" + std::to_string(i))));
  }
  random_mean /= 100;
  const CostModel m;
  const bool table = m.local_ref == 100 && m.cross_silo_rtt == 500'000 && m.disk_seek == 10'000'000 &&
                     demo.runtime->cost_model().local_ref == 100 &&
                     demo.runtime->cost_model().cross_silo_rtt == 500'000 &&
                     demo.runtime->cost_model().disk_seek == 10'000'000;
  const bool charges_match = static_cast<double>(report.total_ns) == partitioned;
  return {table && charges_match && partitioned < random_mean,
          "partitioned_ns=" + fmt(partitioned) + " random_mean_ns=" + fmt(random_mean) +
              " library_total_matches_direct=" + (charges_match ? "yes" : "no") + " trace_events=" +
              std::to_string(trace.events.size())};
}

// 7
Outcome context_tiering() {
  VirtualClock clock;
  ContextStoreConfig cfg;
  cfg.hot_cap_bytes = 64 * 1024;
  cfg.thresholds = {2.0, 0.25};
  ContextStore store(clock, cfg);
  std::mt19937_64 rng(77);
  constexpr Tick kHalfLife = 6 * kHour;
  constexpr Tick kHorizon = 40 * kDay;

  struct Meta {
    ActorId owner;
    std::string key;
    Tick ts;
    std::optional<Tick> period;
    bool deletable;
    std::vector<Tick> accesses;
  };
  std::vector<Meta> meta;
  std::vector<ActorId> owners;
  for (int i = 0; i < 50; ++i) {
    owners.push_back(ActorId{"meter", "a" + std::to_string(i)});
    store.register_owner(owners.back());
  }
  const std::vector<std::string> keys{"consumption", "temperature", "feature", "daily", "location"};

  // Puts arrive in time order over the horizon; each record is its own version.
  std::vector<Tick> times;
  for (int i = 0; i < 10'000; ++i) times.push_back(static_cast<Tick>(rng() % static_cast<std::uint64_t>(kHorizon)));
  std::sort(times.begin(), times.end());
  for (int i = 0; i < 10'000; ++i) {
    clock.advance_to(times[i]);
    const auto& owner = owners[rng() % owners.size()];
    const auto& key = keys[rng() % keys.size()];
    RelevancePolicy p;
    p.scope = Scope{"analytics"};
    p.intensity.half_life = kHalfLife;
    ContextValue value;
    if (key == "consumption" || key == "location") {
      p.period = std::nullopt;
      value = key == "location" ? ContextValue{Blob{"site-" + std::to_string(i)}} : ContextValue{Scalar{double(i), "kWh"}};
    } else if (key == "temperature") {
      p.period = 3 * kDay;
      p.deletable = true;
      value = Scalar{static_cast<double>(rng() % 300) / 10.0, "degC"};
    } else if (key == "feature") {
      p.period = 5 * kDay;
      value = Scalar{static_cast<double>(rng() % 300) / 10.0, "degC"};
    } else {
      p.period = 2 * kDay;
      TimeSeriesSegment seg{times[i], kHour, {}, "degC"};
      for (int h = 0; h < 24; ++h) seg.samples.push_back(static_cast<double>(rng() % 300) / 10.0);
      value = seg;
    }
    const auto ts = times[i];
    if (store.peek(owner, key, ts) && store.peek(owner, key, ts)->timestamp == ts) continue;
    store.put(owner, key, value, ts, p);
    meta.push_back({owner, key, ts, p.period, p.deletable, {clock.now()}});
  }

  // Random reads along the way; some records get hot.
  std::set<std::size_t> deleted_earlier;
  for (int i = 0; i < 3000; ++i) {
    const auto idx = static_cast<std::size_t>(rng() % meta.size());
    auto& m = meta[idx];
    clock.advance_to(clock.now() + static_cast<Tick>(rng() % 600) * kSecond);
    store.get(m.owner, m.key, m.ts, "analytics");
    m.accesses.push_back(clock.now());
  }

  const Tick now = clock.now() + 2 * kDay;
  clock.advance_to(now);
  const auto report = store.maintain(now);

  // Policy audit against an independent reading of each record's policy.
  std::map<std::tuple<ActorId, std::string, Tick>, const Meta*> by_key;
  for (const auto& m : meta) by_key[{m.owner, m.key, m.ts}] = &m;
  std::size_t violations = 0;
  std::size_t present = 0;
  double worst_decay_err = 0;
  store.for_each_record([&](const RecordInfo& info) {
    ++present;
    const auto* m = by_key.at({info.owner, info.key, info.timestamp});
    const Tick age = now - info.timestamp;
    if (!m->period) {
      if (info.downsampled || info.policy.period) ++violations;
    } else {
      if (m->deletable && age > *m->period) ++violations;
      if (age > *m->period) {
        const double intensity = info.policy.intensity.at(now);
        const int required = intensity >= 2.0 ? 0 : (intensity <= 0.25 ? 2 : 1);
        if (static_cast<int>(info.tier) < required) ++violations;
      }
      if (info.downsampled && (info.tier != Tier::Cold || age <= 2 * *m->period)) ++violations;
    }
    double expected = 0;
    for (Tick a : m->accesses) expected += std::exp2(-static_cast<double>(now - a) / static_cast<double>(kHalfLife));
    worst_decay_err = std::max(worst_decay_err, std::abs(info.policy.intensity.at(now) - expected));
  });
  std::size_t must_survive = 0;
  for (const auto& m : meta) {
    if (!(m.deletable && now - m.ts > *m.period)) ++must_survive;
  }
  if (present != must_survive) violations += (present > must_survive ? present - must_survive : must_survive - present);
  const bool cap_ok = store.hot_bytes() <= cfg.hot_cap_bytes;

  // Round trips through every tier.
  std::vector<const Meta*> live;
  for (const auto& m : meta) {
    if (store.peek(m.owner, m.key, m.ts) && store.peek(m.owner, m.key, m.ts)->timestamp == m.ts) live.push_back(&m);
  }
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto* m = live[rng() % live.size()];
    const auto before = store.peek(m->owner, m->key, m->ts);
    const auto bytes = encode_value(before->value);
    if (before->tier == Tier::Hot) store.demote(m->owner, m->key, m->ts, rng() % 2 ? Tier::Warm : Tier::Cold);
    else if (before->tier == Tier::Warm && rng() % 2) store.demote(m->owner, m->key, m->ts, Tier::Cold);
    if (encode_value(store.get(m->owner, m->key, m->ts, "analytics").value) != bytes) ++mismatches;
    store.promote(m->owner, m->key, m->ts);
    if (encode_value(store.peek(m->owner, m->key, m->ts)->value) != bytes) ++mismatches;
  }

  const bool ok = violations == 0 && cap_ok && mismatches == 0 && worst_decay_err <= 1e-9;
  return {ok, "records=" + std::to_string(meta.size()) + " violations=" + std::to_string(violations) +
                  " hot_bytes_after_maintenance=" + std::to_string(report.hot_bytes_after) + " cap=" +
                  std::to_string(cfg.hot_cap_bytes) + " round_trip_mismatches=" + std::to_string(mismatches) +
                  " max_decay_err=" + fmt(worst_decay_err) + " deletes=" + std::to_string(report.count("delete")) +
                  " downsamples=" + std::to_string(report.count("downsample"))};
}

// 8
Outcome temporal_graph() {
  std::mt19937_64 rng(808);
  GraphRegistry g;
  struct Iv {
    ActorId src, dst;
    std::string type;
    Tick from, to;
  };
  std::vector<Iv> accepted;
  std::vector<ActorId> nodes;
  const std::vector<std::string> types{"feeds", "nearby", "measures"};
  std::size_t rejected = 0;
  Tick t = 0;
  for (int i = 0; i < 1000; ++i) {
    t += static_cast<Tick>(rng() % 5);
    const auto r = rng() % 10;
    try {
      if (r < 2 || nodes.size() < 3) {
        ActorId id{"n", std::to_string(nodes.size())};
        g.add_node(id, {}, 0);
        nodes.push_back(id);
      } else if (r < 7) {
        const auto& s = nodes[rng() % nodes.size()];
        const auto& d = nodes[rng() % nodes.size()];
        const auto& type = types[rng() % types.size()];
        g.add_edge(s, d, type, 1.0, t);
        accepted.push_back({s, d, type, t, kOpen});
      } else {
        // End the open interval of a random triple; closed triples must be rejected.
        if (accepted.empty()) continue;
        const auto pick = accepted[rng() % accepted.size()];
        const Tick end = t + 1;
        g.end_edge(pick.src, pick.dst, pick.type, end);
        for (auto& iv : accepted) {
          if (iv.src == pick.src && iv.dst == pick.dst && iv.type == pick.type && iv.to == kOpen) iv.to = end;
        }
      }
    } catch (const Error&) {
      ++rejected;
    }
  }
  const auto replayed = GraphRegistry::replay(g.mutation_log());
  std::size_t mismatches = 0;
  for (int q = 0; q < 200; ++q) {
    const auto& n = nodes[rng() % nodes.size()];
    const Tick at = static_cast<Tick>(rng() % static_cast<std::uint64_t>(t + 10));
    for (const auto& type : types) {
      std::set<ActorId> scan;
      for (const auto& iv : accepted) {
        if (iv.src == n && iv.type == type && iv.from <= at && at < iv.to) scan.insert(iv.dst);
      }
      const auto live = g.neighbors(n, type, at);
      const auto again = replayed.neighbors(n, type, at);
      if (std::set<ActorId>(live.begin(), live.end()) != scan || again != live) ++mismatches;
    }
  }
  return {mismatches == 0, "mutations=1000 rejected=" + std::to_string(rejected) + " queries=200 mismatches=" +
                               std::to_string(mismatches)};
}

// 9
Outcome runtime_round_trips() {
  ActorRuntime rt;
  BehaviorTable b("cell");
  b.on("put", [](const HandlerContext& ctx, EffectSet& fx) {
    fx.set(ctx.envelope.payload.text("k"), ctx.envelope.payload.fields.at("v"));
  });
  b.on("seq", [](const HandlerContext& ctx, EffectSet& fx) {
    const auto key = "seq:" + ctx.envelope.src.str();
    std::int64_t last = 0;
    if (auto it = ctx.self.state.find(key); it != ctx.self.state.end()) last = std::get<std::int64_t>(it->second);
    const auto i = ctx.envelope.payload.integer("i");
    fx.set(key, i);
    if (i != last + 1) fx.set("out_of_order", true);
  });
  rt.register_behavior(b);
  std::mt19937_64 rng(909);
  std::vector<ActorId> ids;
  for (int i = 0; i < 8; ++i) ids.push_back(rt.spawn("cell", std::to_string(i)));

  std::map<ActorId, KeyValueMap> model;
  std::size_t state_mismatches = 0;
  for (int cycle = 0; cycle < 500; ++cycle) {
    const auto& id = ids[rng() % ids.size()];
    const auto k = "k" + std::to_string(rng() % 6);
    Value v;
    switch (rng() % 4) {
      case 0: v = static_cast<std::int64_t>(rng() % 1000); break;
      case 1: v = static_cast<double>(rng() % 1000) / 7.0; break;
      case 2: v = std::string("s") + std::to_string(rng() % 50); break;
      default: v = (rng() % 2) == 0; break;
    }
    rt.send(kSystemActor, id, Message{"put", {{"k", k}, {"v", v}}});
    model[id][k] = v;
    rt.run_until(rt.clock().now() + kMinute);
    rt.clock().advance_by(kHour);
    rt.deactivate_idle(30 * kMinute);
    if (rt.actor(id).status != ActorStatus::Deactivated) ++state_mismatches;
    if (rt.activate(id).state != model[id]) ++state_mismatches;
  }

  std::map<std::pair<ActorId, ActorId>, std::int64_t> next;
  for (int i = 0; i < 10'000; ++i) {
    const auto& s = ids[rng() % ids.size()];
    const auto& d = ids[rng() % ids.size()];
    rt.send(s, d, Message{"seq", {{"i", ++next[{s, d}]}}});
    if (rng() % 50 == 0) rt.run_until(rt.clock().now() + static_cast<Tick>(rng() % 3));
    if (rng() % 500 == 0) {
      rt.drain();
      rt.clock().advance_by(kDay);
      rt.deactivate_idle(kHour);
    }
  }
  rt.drain();
  std::size_t fifo_breaks = 0;
  std::size_t delivered_pairs_ok = 0;
  for (const auto& id : ids) {
    const auto& st = rt.activate(id).state;
    if (st.contains("out_of_order")) ++fifo_breaks;
    for (const auto& s : ids) {
      auto it = st.find("seq:" + s.str());
      const auto expected = next.contains({s, id}) ? next[{s, id}] : 0;
      const auto got = it == st.end() ? 0 : std::get<std::int64_t>(it->second);
      if (got == expected) ++delivered_pairs_ok;
    }
  }
  const bool ok = state_mismatches == 0 && fifo_breaks == 0 && rt.failures().empty() &&
                  delivered_pairs_ok == ids.size() * ids.size();
  return {ok, "cycles=500 state_mismatches=" + std::to_string(state_mismatches) + " sends=10000 fifo_breaks=" +
                  std::to_string(fifo_breaks) + " failures=" + std::to_string(rt.failures().size())};
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

// 10
Outcome determinism(const std::string& cli, const fs::path& scratch) {
  const auto dir = scratch / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cmd = "\"" + cli + "\" all --seed 42 --out \"" + dir.string() + "\" > \"" +
                          (scratch / "determinism.log").string() + "\" 2>&1";
  const int first = std::system(cmd.c_str());
  const auto a = read_tree(dir);
  const int second = std::system(cmd.c_str());
  const auto b = read_tree(dir);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  const bool ok = !a.empty() && a.size() == b.size() && differing == 0;
  return {ok, "files=" + std::to_string(a.size()) + " differing=" + std::to_string(differing) +
                  " exit_codes=" + std::to_string(first) + "," + std::to_string(second)};
}

// 11
Outcome calibration() {
  const double r2 = calibration_r_squared(90, 42);
  return {r2 >= 0.6 && r2 <= 0.8, "r_squared=" + fmt(r2) + " window=[0.6, 0.8]"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: gova_acceptance <gova cli> <scratch dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path scratch = argv[2];
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"context_reaggregation", context_correction},
      {"relationship_feature_join", relationship},
      {"identity_as_of_readings", identity},
      {"behavior_action_log_baseline", behavior},
      {"partition_quality", partition_quality},
      {"placement_benefit", placement_benefit},
      {"context_tiering", context_tiering},
      {"temporal_graph_replay", temporal_graph},
      {"runtime_round_trips", runtime_round_trips},
      {"determinism", [&] { return determinism(cli, scratch); }},
      {"calibration", calibration},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << (i + 1) << " " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << " ("
              << o.detail << ")" << std::endl;
  }
  std::cout << "acceptance: " << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
