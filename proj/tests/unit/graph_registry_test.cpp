#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <vector>

#include "gova/graph_registry.hpp"
#include "gova/record_log.hpp"

namespace gova {
namespace {

ActorId node(int i) { return ActorId{"n", std::to_string(i)}; }

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

struct Interval {
  int src, dst;
  std::string type;
  Tick from, to;
};

// Random edges with disjoint validity per (src, dst, type), built in time order.
std::vector<Interval> random_intervals(std::mt19937_64& rng, int nodes, int count) {
  std::vector<Interval> out;
  std::map<std::tuple<int, int, std::string>, Tick> last_end;
  const std::vector<std::string> types{"feeds", "nearby"};
  while (static_cast<int>(out.size()) < count) {
    const int s = static_cast<int>(rng() % nodes);
    const int d = static_cast<int>(rng() % nodes);
    if (s == d) continue;
    const auto& type = types[rng() % types.size()];
    auto key = std::make_tuple(s, d, type);
    const Tick base = last_end.contains(key) ? last_end[key] : 0;
    const Tick from = base + static_cast<Tick>(rng() % 50);
    const Tick to = (rng() % 4 == 0) ? kOpen : from + 1 + static_cast<Tick>(rng() % 60);
    if (last_end.contains(key) && last_end[key] == kOpen) continue;
    last_end[key] = to;
    out.push_back({s, d, type, from, to});
  }
  return out;
}

void load_intervals(GraphRegistry& g, const std::vector<Interval>& iv) {
  for (const auto& e : iv) {
    g.add_edge(node(e.src), node(e.dst), e.type, 1.0, e.from);
    if (e.to != kOpen) g.end_edge(node(e.src), node(e.dst), e.type, e.to);
  }
}

TEST(GraphRegistry, NodeErrors) {
  GraphRegistry g;
  g.add_node(node(0));
  EXPECT_EQ(code_of([&] { g.add_node(node(0)); }), ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([&] { (void)g.node(node(9)); }), ErrorCode::UnknownActor);
  EXPECT_EQ(code_of([&] { g.add_edge(node(0), node(9), "feeds", 1.0, 0); }), ErrorCode::UnknownActor);
}

TEST(GraphRegistry, EdgeValidityRules) {
  GraphRegistry g;
  g.add_node(node(0));
  g.add_node(node(1));
  g.add_edge(node(0), node(1), "feeds", 1.0, 10);
  EXPECT_EQ(code_of([&] { g.add_edge(node(0), node(1), "feeds", 1.0, 20); }), ErrorCode::OverlappingValidity);
  EXPECT_EQ(code_of([&] { g.end_edge(node(0), node(1), "feeds", 10); }), ErrorCode::InvalidInterval);
  g.end_edge(node(0), node(1), "feeds", 30);
  EXPECT_EQ(code_of([&] { g.end_edge(node(0), node(1), "feeds", 40); }), ErrorCode::NoOpenEdge);
  EXPECT_EQ(code_of([&] { g.add_edge(node(0), node(1), "feeds", 1.0, 25); }), ErrorCode::OverlappingValidity);
  g.add_edge(node(0), node(1), "feeds", 1.0, 30);
  EXPECT_EQ(g.neighbors(node(0), "feeds", 9), std::vector<ActorId>{});
  EXPECT_EQ(g.neighbors(node(0), "feeds", 10), std::vector<ActorId>{node(1)});
  EXPECT_EQ(g.neighbors(node(0), "feeds", 29), std::vector<ActorId>{node(1)});
  EXPECT_EQ(g.parents(node(1), "feeds", 30), std::vector<ActorId>{node(0)});
}

TEST(GraphRegistry, FiveTogglesGiveFiveClosedIntervals) {
  GraphRegistry g;
  for (int i = 0; i < 3; ++i) g.add_node(node(i));
  g.add_edge(node(0), node(2), "feeds", 1.0, 0);
  bool on_a = true;
  for (int i = 1; i <= 5; ++i) {
    const Tick t = i * 100;
    g.end_edge(on_a ? node(0) : node(1), node(2), "feeds", t);
    g.add_edge(on_a ? node(1) : node(0), node(2), "feeds", 1.0, t);
    on_a = !on_a;
  }
  const auto closed = std::count_if(g.edges().begin(), g.edges().end(), [](const auto& e) { return !e.is_open(); });
  EXPECT_EQ(closed, 5);
  const auto replayed = GraphRegistry::replay(g.mutation_log());
  EXPECT_EQ(replayed.edges(), g.edges());
  for (Tick t = 0; t < 700; t += 50) {
    EXPECT_EQ(replayed.parents(node(2), "feeds", t), g.parents(node(2), "feeds", t));
  }
}

TEST(GraphRegistry, NeighborQueriesMatchLinearScan) {
  std::mt19937_64 rng(11);
  GraphRegistry g;
  const int n = 12;
  for (int i = 0; i < n; ++i) g.add_node(node(i));
  const auto iv = random_intervals(rng, n, 50);
  load_intervals(g, iv);
  for (int q = 0; q < 20; ++q) {
    const int src = static_cast<int>(rng() % n);
    const Tick t = static_cast<Tick>(rng() % 400);
    for (std::string type : {"feeds", "nearby"}) {
      std::set<ActorId> expected;
      for (const auto& e : iv) {
        if (e.src == src && e.type == type && e.from <= t && t < e.to) expected.insert(node(e.dst));
      }
      const auto got = g.neighbors(node(src), type, t);
      EXPECT_EQ(std::set<ActorId>(got.begin(), got.end()), expected);
    }
  }
}

TEST(GraphRegistry, TraverseMatchesBfsOnMaterializedSnapshot) {
  std::mt19937_64 rng(3);
  GraphRegistry g;
  const int n = 15;
  for (int i = 0; i < n; ++i) g.add_node(node(i));
  load_intervals(g, random_intervals(rng, n, 60));
  for (int q = 0; q < 10; ++q) {
    const int origin = static_cast<int>(rng() % n);
    const Tick t = static_cast<Tick>(rng() % 400);
    const auto view = g.snapshot_at(t);
    std::map<ActorId, std::vector<ActorId>> adj;
    for (const auto& e : view.edges()) {
      if (e.type == "feeds") adj[e.src].push_back(e.dst);
    }
    std::set<ActorId> seen{node(origin)};
    std::deque<ActorId> frontier{node(origin)};
    while (!frontier.empty()) {
      auto cur = frontier.front();
      frontier.pop_front();
      for (const auto& nb : adj[cur]) {
        if (seen.insert(nb).second) frontier.push_back(nb);
      }
    }
    EXPECT_EQ(g.traverse(node(origin), edge_type_is("feeds"), t), seen);
  }
}

TEST(GraphRegistry, SnapshotHonoursNodeSince) {
  GraphRegistry g;
  g.add_node(node(0), {}, 0);
  g.add_node(node(1), {}, 100);
  EXPECT_EQ(g.snapshot_at(50).node_count(), 1U);
  EXPECT_EQ(g.snapshot_at(100).node_count(), 2U);
}

TEST(GraphRegistry, FindServicePrefersHourlyStation) {
  GraphRegistry g;
  const ActorId origin{"substation", "s"};
  g.add_node(origin, {{"lat", 52.0}, {"lon", 4.0}});
  const double deg_per_km = 1.0 / 111.195;
  const ActorId daily{"weather_station", "near"};
  const ActorId hourly{"weather_station", "far"};
  g.add_node(daily, {{"lat", 52.0 + 3 * deg_per_km}, {"lon", 4.0}, {"sampling_period", std::int64_t{kDay}}});
  g.add_node(hourly, {{"lat", 52.0 + 5 * deg_per_km}, {"lon", 4.0}, {"sampling_period", std::int64_t{kHour}}});
  EXPECT_NEAR(haversine_km(*geo_of(g.node(origin).attrs), *geo_of(g.node(daily).attrs)), 3.0, 1e-3);
  auto hourly_ok = [](const Attributes& a) {
    auto p = numeric_attr(a, "sampling_period");
    return p && *p <= static_cast<double>(kHour);
  };
  EXPECT_EQ(g.find_service(origin, "weather_station", hourly_ok, 0), hourly);
  EXPECT_EQ(g.find_service(origin, "weather_station", [](const Attributes&) { return true; }, 0), daily);
}

TEST(GraphRegistry, FindServiceMatchesLinearScan) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lat(51.5, 52.5), lon(3.5, 5.0);
  GraphRegistry g;
  std::vector<std::pair<ActorId, GeoPoint>> stations;
  for (int i = 0; i < 20; ++i) {
    GeoPoint p{lat(rng), lon(rng)};
    ActorId id{"weather_station", "w" + std::to_string(i)};
    g.add_node(id, {{"lat", p.lat}, {"lon", p.lon}});
    stations.emplace_back(id, p);
  }
  for (int q = 0; q < 10; ++q) {
    GeoPoint o{lat(rng), lon(rng)};
    ActorId origin{"substation", std::to_string(q)};
    g.add_node(origin, {{"lat", o.lat}, {"lon", o.lon}});
    ActorId best;
    double best_d = 1e300;
    for (const auto& [id, p] : stations) {
      const double d = haversine_km(o, p);
      if (d < best_d) {
        best_d = d;
        best = id;
      }
    }
    EXPECT_EQ(g.find_service(origin, "weather_station", [](const Attributes&) { return true; }, 0), best);
  }
}

TEST(GraphRegistry, SubscriptionsMatchLinearScan) {
  std::mt19937_64 rng(21);
  GraphRegistry g;
  for (int i = 0; i < 10; ++i) g.add_node(node(i));
  const std::vector<std::string> patterns{"temperature", "consumption", "*", "temp*", "switch_state"};
  std::set<std::tuple<ActorId, ActorId, std::string>> subs;
  for (int i = 0; i < 100; ++i) {
    auto s = node(static_cast<int>(rng() % 10));
    auto p = node(static_cast<int>(rng() % 10));
    const auto& k = patterns[rng() % patterns.size()];
    g.subscribe(s, p, k);
    subs.insert({s, p, k});
  }
  EXPECT_EQ(g.subscription_count(), subs.size());
  for (int p = 0; p < 10; ++p) {
    for (std::string key : {"temperature", "consumption", "switch_state", "tempo"}) {
      std::set<ActorId> expected;
      for (const auto& [s, pub, pat] : subs) {
        const bool match = pat == "*" || pat == key || (pat.back() == '*' && key.starts_with(pat.substr(0, pat.size() - 1)));
        if (pub == node(p) && match) expected.insert(s);
      }
      auto got = g.subscribers_of(node(p), key);
      EXPECT_EQ(std::set<ActorId>(got.begin(), got.end()), expected);
    }
  }
}

TEST(GraphRegistry, KeyPatterns) {
  EXPECT_TRUE(key_matches("*", "anything"));
  EXPECT_TRUE(key_matches("temp*", "temperature"));
  EXPECT_FALSE(key_matches("temp*", "consumption"));
  EXPECT_TRUE(key_matches("switch_state", "switch_state"));
  EXPECT_FALSE(key_matches("switch_state", "switch_state2"));
}

TEST(GraphRegistry, PersistedLogRecoversGraph) {
  std::mt19937_64 rng(2);
  RecordLog log;
  GraphRegistry g;
  for (int i = 0; i < 5; ++i) g.add_node(node(i), {{"idx", std::int64_t{i}}});
  g.persist_to(&log);
  load_intervals(g, random_intervals(rng, 5, 20));
  const auto recovered = GraphRegistry::recover(log);
  EXPECT_EQ(recovered.node_count(), g.node_count());
  EXPECT_EQ(recovered.edges(), g.edges());
}

TEST(GraphRegistry, ReplayUpToTimeDropsLaterMutations) {
  GraphRegistry g;
  g.add_node(node(0));
  g.add_node(node(1));
  g.add_edge(node(0), node(1), "feeds", 1.0, 10);
  g.end_edge(node(0), node(1), "feeds", 20);
  const auto early = GraphRegistry::replay(g.mutation_log(), 15);
  ASSERT_EQ(early.edges().size(), 1U);
  EXPECT_TRUE(early.edges()[0].is_open());
}

TEST(GraphRegistry, ValidateReportsFirstError) {
  GraphRegistry g;
  g.add_node(node(0));
  g.add_node(node(1));
  GraphMutation end;
  end.kind = GraphMutation::Kind::EndEdge;
  end.at = 5;
  end.edge = EdgeRecord{node(0), node(1), "feeds", 1.0, 0, 5};
  EXPECT_EQ(code_of([&] { g.validate({end}); }), ErrorCode::NoOpenEdge);
}

TEST(GraphRegistry, TextFormatRoundTrips) {
  std::istringstream in(
      "# demo\n"
      "node substation f0 lat=52 lon=4\n"
      "node meter f0m00\n"
      "\n"
      "edge feeds substation:f0 meter:f0m00 1 0\n");
  GraphRegistry g;
  load_graph(g, in);
  EXPECT_EQ(g.node_count(), 2U);
  EXPECT_EQ(g.neighbors(ActorId{"substation", "f0"}, "feeds", 0), (std::vector<ActorId>{ActorId{"meter", "f0m00"}}));
  std::ostringstream out;
  write_graph(g, out);
  GraphRegistry again;
  std::istringstream back(out.str());
  load_graph(again, back);
  EXPECT_EQ(again.edges(), g.edges());
  std::ostringstream out2;
  write_graph(again, out2);
  EXPECT_EQ(out2.str(), out.str());
}

TEST(GraphRegistry, MalformedLineIsParseError) {
  std::istringstream in("edge feeds nope\n");
  GraphRegistry g;
  EXPECT_EQ(code_of([&] { load_graph(g, in); }), ErrorCode::ParseError);
}

TEST(GraphView, EmptyFilterSelectsAllTags) {
  GraphRegistry g;
  for (int i = 0; i < 3; ++i) g.add_node(node(i));
  g.add_edge(node(0), node(1), "feeds", 1.0, 0);
  g.add_edge(node(1), node(2), "nearby", 1.0, 0);
  const auto v = g.snapshot_at(0);
  EXPECT_EQ(v.edges_of({}).size(), 2U);
  EXPECT_EQ(v.edges_of({"feeds"}).size(), 1U);
}

}  // namespace
}  // namespace gova
