#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gova/grid_config.hpp"
#include "gova/smartgrid.hpp"

namespace gova {
namespace {

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

TEST(GridSpec, DemoCountsMatchFormula) {
  const auto spec = demo_grid_spec();
  EXPECT_EQ(spec.feeders, 3);
  EXPECT_EQ(spec.meters_per_feeder, 50);
  EXPECT_EQ(expected_actor_count(spec), 3U + 150U + spec.tie_switches.size() + spec.weather_stations.size());
  EXPECT_EQ(expected_actor_count(spec), 159U);
  EXPECT_EQ(expected_edge_count(spec), 150U + 4U + 3U);
}

TEST(GridSpec, ValidationRejectsBadSpecs) {
  auto bad = demo_grid_spec();
  bad.feeders = 0;
  EXPECT_EQ(code_of([&] { validate(bad); }), ErrorCode::InvalidSpec);
  bad = demo_grid_spec();
  bad.tie_switches.push_back({0, 0, 1});
  EXPECT_EQ(code_of([&] { validate(bad); }), ErrorCode::InvalidSpec);
  bad = demo_grid_spec();
  bad.weather_stations.push_back(bad.weather_stations.front());
  EXPECT_EQ(code_of([&] { validate(bad); }), ErrorCode::InvalidSpec);
  bad = demo_grid_spec();
  bad.dr_factor = 1.5;
  EXPECT_EQ(code_of([&] { validate(bad); }), ErrorCode::InvalidSpec);
  EXPECT_NO_THROW(validate(demo_grid_spec()));
}

TEST(GridSpec, TextRoundTrip) {
  auto spec = demo_grid_spec();
  spec.seed = 7;
  spec.consumption.temp_coeff = 0.2;
  std::stringstream ss;
  write_grid_spec(spec, ss);
  const auto back = read_grid_spec(ss);
  EXPECT_EQ(back.feeders, spec.feeders);
  EXPECT_EQ(back.seed, 7U);
  EXPECT_EQ(back.tie_switches.size(), spec.tie_switches.size());
  EXPECT_EQ(back.weather_stations.size(), spec.weather_stations.size());
  EXPECT_EQ(back.weather_stations[1].sampling_period, spec.weather_stations[1].sampling_period);
  EXPECT_EQ(back.consumption.base_profile, spec.consumption.base_profile);
  EXPECT_EQ(back.consumption.temp_coeff, 0.2);
  std::stringstream again;
  write_grid_spec(back, again);
  std::stringstream first;
  write_grid_spec(spec, first);
  EXPECT_EQ(again.str(), first.str());
}

TEST(GridSpec, ConfigParserHandlesSectionsAndComments) {
  std::istringstream in(
      "# top\n"
      "[grid]\n"
      "feeders = 2   # two\n"
      "[tie_switch]\n"
      "tie = 0 1 3\n"
      "tie = 1 0 2\n");
  const auto sections = parse_config(in);
  ASSERT_GE(sections.size(), 3U);
  std::istringstream spec_in(
      "[grid]\nfeeders = 2\nmeters_per_feeder = 5\n[tie_switch]\ntie = 0 1 3\n"
      "[weather_station]\nstation = w0 52 4 1h\n");
  const auto spec = read_grid_spec(spec_in);
  EXPECT_EQ(spec.feeders, 2);
  EXPECT_EQ(spec.meters_per_feeder, 5);
  ASSERT_EQ(spec.tie_switches.size(), 1U);
  EXPECT_EQ(spec.tie_switches[0].block_size, 3);
  std::istringstream bad("[grid]\nfeeders = many\n");
  EXPECT_EQ(code_of([&] { (void)read_grid_spec(bad); }), ErrorCode::ParseError);
}

TEST(GridSpec, Durations) {
  EXPECT_EQ(parse_duration("24"), 24 * kHour);
  EXPECT_EQ(parse_duration("30m"), 30 * kMinute);
  EXPECT_EQ(parse_duration("2d"), 2 * kDay);
  EXPECT_EQ(parse_duration("1.5h"), 90 * kMinute);
  EXPECT_EQ(code_of([] { (void)parse_duration("soon"); }), ErrorCode::ParseError);
}

TEST(BuildGrid, DemoGridCounts) {
  ActorRuntime rt;
  const auto spec = demo_grid_spec();
  const auto grid = build_grid(rt, spec);
  EXPECT_EQ(rt.actor_count(), expected_actor_count(spec));
  EXPECT_EQ(rt.graph().node_count(), 159U);
  EXPECT_EQ(rt.graph().edges().size(), expected_edge_count(spec));
  EXPECT_EQ(grid.meters.size(), 150U);
  EXPECT_TRUE(rt.failures().empty());
  for (std::size_t i = 0; i < grid.switches.size(); ++i) {
    EXPECT_EQ(grid.switch_blocks[i].size(), static_cast<std::size_t>(spec.tie_switches[i].block_size));
    const auto subs = rt.graph().subscribers_of(grid.switches[i], "switch_state");
    EXPECT_EQ(subs.size(), 2U);
  }
}

TEST(BuildGrid, SingleTieSwitchGivesOneHundredFiftySixActors) {
  ActorRuntime rt;
  auto spec = demo_grid_spec();
  spec.tie_switches = {{0, 1, 25}};
  build_grid(rt, spec);
  EXPECT_EQ(rt.actor_count(), 156U);
}

TEST(BuildGrid, InvalidSpecSpawnsNothing) {
  ActorRuntime rt;
  auto spec = demo_grid_spec();
  spec.feeders = 0;
  EXPECT_EQ(code_of([&] { build_grid(rt, spec); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(rt.actor_count(), 0U);
}

TEST(BuildGrid, EveryMeterHasItsHomeSubstationUpstream) {
  ActorRuntime rt;
  const auto grid = build_grid(rt, demo_grid_spec());
  for (const auto& [m, f] : grid.home_feeder) {
    EXPECT_EQ(upstream_substation(rt.graph(), m, 0), grid.substations[f]) << m.str();
  }
}

TEST(BuildGrid, SubstationsUseNearestStation) {
  ActorRuntime rt;
  const auto grid = build_grid(rt, demo_grid_spec());
  for (std::size_t f = 0; f < grid.substations.size(); ++f) {
    const auto here = substation_geo(static_cast<int>(f));
    ActorId best;
    double best_d = 1e300;
    for (const auto& st : grid.stations) {
      const double d = haversine_km(here, *geo_of(rt.graph().node(st).attrs));
      if (d < best_d) {
        best_d = d;
        best = st;
      }
    }
    EXPECT_EQ(rt.graph().neighbors(grid.substations[f], "nearby", 0), std::vector<ActorId>{best});
  }
}

TEST(Synthesis, WeatherIsDeterministicAndHourly) {
  const auto a = synth_weather("w0", 3, 42);
  const auto b = synth_weather("w0", 3, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.samples.size(), 72U);
  EXPECT_NE(synth_weather("w1", 3, 42), a);
}

TEST(Synthesis, NoiselessModelMatchesFormula) {
  WeatherParams wp;
  wp.noise_sd = 0;
  const auto w = synth_weather("w0", 2, 1, wp);
  for (std::size_t h = 0; h < w.samples.size(); ++h) {
    const double day = static_cast<double>(h) / 24.0;
    const double expected = 10.0 + 8.0 * std::sin(2 * std::numbers::pi * (day - 105.0) / 365.0) +
                            4.0 * std::sin(2 * std::numbers::pi * (static_cast<double>(h % 24) - 9.0) / 24.0);
    EXPECT_NEAR(w.samples[h], expected, 1e-12);
  }
  auto cp = default_consumption_params();
  cp.noise_sd = 0;
  const auto c = synth_consumption(meter_id(0, 0), w, cp, 1);
  for (std::size_t h = 0; h < c.samples.size(); ++h) {
    EXPECT_NEAR(c.samples[h], cp.base_profile[h % 24] + cp.temp_coeff * std::abs(w.samples[h] - cp.comfort_temp),
                1e-12);
  }
}

TEST(Synthesis, CoarseWeatherIsRejected) {
  TimeSeriesSegment coarse{0, 3 * kHour, {1, 2, 3}, "degC"};
  EXPECT_EQ(code_of([&] { (void)synth_consumption(meter_id(0, 0), coarse, default_consumption_params(), 1); }),
            ErrorCode::ResolutionTooCoarse);
}

TEST(Calibration, OlsOnKnownData) {
  EXPECT_NEAR(ols_r_squared({1, 2, 3, 4}, {1, 3, 2, 4}), 0.64, 1e-12);
  EXPECT_NEAR(ols_r_squared({1, 2, 3}, {2, 4, 6}), 1.0, 1e-12);
}

TEST(Calibration, DefaultParamsLandInWindow) {
  const double r2 = calibration_r_squared(90, 42);
  EXPECT_GE(r2, 0.6);
  EXPECT_LE(r2, 0.8);
}

TEST(Baseline, ExcludingActionsMatchesFilteredMean) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const ActorId meter = meter_id(0, 1);
  TimeSeriesSegment s{0, kHour, {}, "kWh"};
  for (int h = 0; h < 24 * 20; ++h) s.samples.push_back(u(rng));
  ActionLog log;
  std::vector<DrInterval> intervals;
  for (int i = 0; i < 8; ++i) {
    const Tick start = static_cast<Tick>(rng() % (24 * 19)) * kHour;
    const Tick end = start + static_cast<Tick>(1 + rng() % 4) * kHour;
    intervals.push_back({start, end});
    log.append({0, meter, "dr_command", {{"factor", "0.5"}, {"start", std::to_string(start)}, {"end", std::to_string(end)}}});
  }
  log.append({0, meter_id(0, 2), "dr_command", {{"factor", "0.5"}, {"start", "0"}, {"end", std::to_string(20 * kDay)}}});
  const auto got = baseline_excluding_actions(s, log, meter);
  for (int hod = 0; hod < 24; ++hod) {
    double sum = 0;
    int n = 0;
    for (int h = hod; h < 24 * 20; h += 24) {
      const Tick t = h * kHour;
      bool excluded = false;
      for (const auto& d : intervals) excluded = excluded || (d.start <= t && t < d.end);
      if (excluded) continue;
      sum += s.samples[static_cast<std::size_t>(h)];
      ++n;
    }
    EXPECT_NEAR(got[static_cast<std::size_t>(hod)], sum / n, 1e-9);
  }
}

TEST(Baseline, FullyExcludedHourThrows) {
  const ActorId meter = meter_id(0, 1);
  TimeSeriesSegment s{0, kHour, std::vector<double>(48, 1.0), "kWh"};
  ActionLog log;
  log.append({0, meter, "dr_command", {{"factor", "0.5"}, {"start", "0"}, {"end", std::to_string(2 * kDay)}}});
  EXPECT_EQ(code_of([&] { (void)baseline_excluding_actions(s, log, meter); }), ErrorCode::AllExcluded);
}

TEST(DemandResponse, CommandScalesReadingsInWindowAndIsLogged) {
  ActorRuntime rt;
  ActionLog log;
  GridSpec spec;
  spec.feeders = 1;
  spec.meters_per_feeder = 2;
  spec.weather_stations = {{"w0", GeoPoint{52.0, 4.0}, kHour}};
  const auto grid = build_grid(rt, spec);
  const auto m = grid.meters[0];
  issue_dr_command(rt, log, m, 0.5, 2 * kHour, 4 * kHour);
  rt.drain();
  for (int h = 0; h < 6; ++h) {
    rt.run_until(h * kHour);
    rt.send(kSystemActor, m, Message{"reading", {{"t", std::int64_t{h * kHour}}, {"kwh", 2.0}}});
    rt.drain();
  }
  const auto series = rt.context().series(m, kConsumptionKey, 0, 6 * kHour, kHour);
  EXPECT_EQ(series.samples, (std::vector<double>{2, 2, 1, 1, 2, 2}));
  ASSERT_EQ(log.count("dr_command"), 1U);
  EXPECT_EQ(log.entries()[0].params.at("start"), std::to_string(2 * kHour));
  const auto iv = dr_intervals(log, m);
  ASSERT_EQ(iv.size(), 1U);
  EXPECT_EQ(iv[0].end, 4 * kHour);
}

TEST(Cost, TableChargesPerMessage) {
  MessageTrace trace;
  trace.actors = {ActorId{"a", "1"}, ActorId{"a", "2"}, ActorId{"a", "3"}};
  for (int i = 0; i < 10; ++i) trace.events.push_back({TraceEvent::Kind::Message, 0, 1, 0, 0});
  Assignment same{2, {{trace.actors[0], 0}, {trace.actors[1], 0}, {trace.actors[2], 1}}};
  EXPECT_EQ(cost_report(trace, same).total_ns, 1'000);
  Assignment split{2, {{trace.actors[0], 0}, {trace.actors[1], 1}, {trace.actors[2], 1}}};
  const auto r = cost_report(trace, split);
  EXPECT_EQ(r.total_ns, 5'000'000);
  EXPECT_EQ(r.cross_messages, 10U);
  trace.events.push_back({TraceEvent::Kind::Snapshot, 2, 2, 0, 1500});
  EXPECT_EQ(cost_report(trace, split).snapshot_ns, 10'000'000 + 2 * 10'000);
  Assignment partial{2, {{trace.actors[0], 0}}};
  EXPECT_EQ(code_of([&] { (void)cost_report(trace, partial); }), ErrorCode::UnknownActorInTrace);
}

TEST(SeriesCsv, RoundTrip) {
  TimeSeriesSegment s{3 * kHour, kHour, {1.5, 0.1, 1.0 / 3.0}, "kWh"};
  std::stringstream ss;
  write_series_csv(s, ss);
  EXPECT_EQ(read_series_csv(ss), s);
  std::istringstream bad("time,value\n");
  EXPECT_EQ(code_of([&] { (void)read_series_csv(bad); }), ErrorCode::ParseError);
}

TEST(Ids, Formats) {
  EXPECT_EQ(substation_id(0).str(), "substation:f0");
  EXPECT_EQ(meter_id(0, 7).str(), "meter:f0m07");
  EXPECT_EQ(switch_id(0).str(), "switch:t0");
  EXPECT_EQ(station_id("w0").str(), "weather_station:w0");
}

}  // namespace
}  // namespace gova
