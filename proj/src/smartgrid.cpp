#include "gova/smartgrid.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace gova {

ActorId substation_id(int feeder) { return {kind::kSubstation, "f" + std::to_string(feeder)}; }

ActorId meter_id(int feeder, int index) {
  std::ostringstream s;
  s << 'f' << feeder << 'm' << std::setw(2) << std::setfill('0') << index;
  return {kind::kMeter, s.str()};
}

ActorId switch_id(int index) { return {kind::kSwitch, "t" + std::to_string(index)}; }
ActorId station_id(const std::string& name) { return {kind::kStation, name}; }
ActorId consumer_id(const std::string& name) { return {kind::kConsumer, name}; }

GeoPoint substation_geo(int feeder) { return {52.0, 4.0 + 0.2 * feeder}; }

namespace {

const Scope& consumption_scope() {
  static const Scope s{"analytics", "billing", "forecasting"};
  return s;
}
const Scope& aggregate_scope() {
  static const Scope s{"analytics", "forecasting"};
  return s;
}
const Scope& forecasting_scope() {
  static const Scope s{"forecasting"};
  return s;
}
const Scope& location_scope() {
  static const Scope s{"analytics", "billing"};
  return s;
}

RelevancePolicy policy(const Scope& scope, std::optional<Tick> period, bool deletable) {
  RelevancePolicy p;
  p.scope = scope;
  p.period = period;
  p.deletable = deletable;
  p.intensity.half_life = 0;  // store default
  return p;
}

RelevancePolicy consumption_policy() { return policy(consumption_scope(), std::nullopt, false); }
RelevancePolicy aggregate_policy() { return policy(aggregate_scope(), std::nullopt, false); }

Attributes geo_attrs(GeoPoint g) { return {{"lat", g.lat}, {"lon", g.lon}}; }

double state_number(const KeyValueMap& state, const std::string& key, double fallback) {
  auto it = state.find(key);
  if (it == state.end()) return fallback;
  if (auto d = std::get_if<double>(&it->second)) return *d;
  if (auto i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  return fallback;
}

std::string state_text(const KeyValueMap& state, const std::string& key) {
  auto it = state.find(key);
  if (it == state.end()) return {};
  if (auto s = std::get_if<std::string>(&it->second)) return *s;
  return {};
}

// Value of `key` stored exactly at `t`, if any.
std::optional<double> scalar_at(const ContextStore& context, const ActorId& owner, const std::string& key, Tick t) {
  auto rec = context.peek(owner, key, t);
  if (!rec || rec->timestamp != t) return std::nullopt;
  if (auto s = std::get_if<Scalar>(&rec->value)) return s->value;
  return std::nullopt;
}

BehaviorTable meter_behavior() {
  BehaviorTable b(kind::kMeter);
  b.on("reading", [](const HandlerContext& ctx, EffectSet& fx) {
    const Tick t = ctx.envelope.payload.integer("t");
    double kwh = ctx.envelope.payload.number("kwh");
    const double start = state_number(ctx.self.state, "dr_start", -1);
    const double end = state_number(ctx.self.state, "dr_end", -1);
    if (static_cast<double>(t) >= start && static_cast<double>(t) < end) {
      kwh *= state_number(ctx.self.state, "dr_factor", 1.0);
    }
    fx.write(kConsumptionKey, Scalar{kwh, "kWh"}, t, consumption_policy());
    if (auto sub = upstream_substation(ctx.graph, ctx.self.id, t)) {
      fx.send(*sub, Message{"report", {{"t", t}, {"kwh", kwh}}});
    }
  });
  b.on("dr_command", [](const HandlerContext& ctx, EffectSet& fx) {
    const auto& p = ctx.envelope.payload;
    fx.set("dr_factor", p.number("factor"));
    fx.set("dr_start", static_cast<double>(p.integer("start")));
    fx.set("dr_end", static_cast<double>(p.integer("end")));
  });
  b.on("set_location", [](const HandlerContext& ctx, EffectSet& fx) {
    const auto& p = ctx.envelope.payload;
    fx.write(kLocationKey, Blob{p.text("location")}, p.integer("t"), policy(location_scope(), std::nullopt, false));
  });
  b.on("reassign", [](const HandlerContext& ctx, EffectSet& fx) {
    const auto& p = ctx.envelope.payload;
    const Tick t = p.integer("t");
    for (const auto& old : ctx.graph.neighbors(ctx.self.id, rel::kMeasures, t)) {
      fx.end_edge(ctx.self.id, old, std::string(rel::kMeasures), t);
    }
    fx.add_edge(ctx.self.id, ActorId::parse(p.text("consumer")), std::string(rel::kMeasures), 1.0, t);
  });
  return b;
}

BehaviorTable substation_behavior() {
  BehaviorTable b(kind::kSubstation);
  b.on("report", [](const HandlerContext& ctx, EffectSet& fx) {
    const Tick t = ctx.envelope.payload.integer("t");
    const double prior = scalar_at(ctx.context, ctx.self.id, kAggregateKey, t).value_or(0.0);
    fx.write(kAggregateKey, Scalar{prior + ctx.envelope.payload.number("kwh"), "kWh"}, t, aggregate_policy());
  });
  b.on("notification", [](const HandlerContext& ctx, EffectSet& fx) {
    const auto& p = ctx.envelope.payload;
    const auto& key = p.text("key");
    if (key == kTemperatureKey) {
      if (p.text("publisher") != state_text(ctx.self.state, "nearby")) return;
      fx.write(kTemperatureFeatureKey, Scalar{p.number("new"), "degC"}, p.integer("t"),
               policy(forecasting_scope(), 30 * kDay, false));
    } else if (key == "switch_state") {
      fx.set("last_switch_event", p.integer("t"));
    }
  });
  b.on("reaggregate", [](const HandlerContext& ctx, EffectSet& fx) {
    const auto& p = ctx.envelope.payload;
    auto seg = compute_reaggregation(ctx.graph, ctx.context, ctx.self.id, p.integer("t_start"), p.integer("t_end"));
    for (std::size_t i = 0; i < seg.samples.size(); ++i) {
      fx.write(kAggregateKey, Scalar{seg.samples[i], "kWh"}, seg.time_of(i), aggregate_policy());
    }
  });
  b.on("resolve_nearby", [](const HandlerContext& ctx, EffectSet& fx) {
    const Tick t = ctx.envelope.payload.integer("t");
    auto best = ctx.graph.find_service(ctx.self.id, kind::kStation, nullptr, t);
    if (!best) return;
    fx.set("nearby", best->str());
    auto current = ctx.graph.neighbors(ctx.self.id, rel::kNearby, t);
    if (current.size() == 1 && current.front() == *best) return;
    for (const auto& old : current) fx.end_edge(ctx.self.id, old, std::string(rel::kNearby), t);
    fx.add_edge(ctx.self.id, *best, std::string(rel::kNearby), 1.0, t);
  });
  return b;
}

BehaviorTable switch_behavior() {
  BehaviorTable b(kind::kSwitch);
  b.on("set_state", [](const HandlerContext& ctx, EffectSet& fx) {
    fx.set("state", ctx.envelope.payload.text("state"));
  });
  return b;
}

BehaviorTable station_behavior() {
  BehaviorTable b(kind::kStation);
  b.on("sample", [](const HandlerContext& ctx, EffectSet& fx) {
    const Tick t = ctx.envelope.payload.integer("t");
    const double temp = ctx.envelope.payload.number("temp");
    fx.write(kTemperatureKey, Scalar{temp, "degC"}, t, policy(forecasting_scope(), 7 * kDay, true));
    fx.publish(kTemperatureKey, state_number(ctx.self.state, "last_temp", 0.0), temp, t);
    fx.set("last_temp", temp);
  });
  b.on("daily_summary", [](const HandlerContext& ctx, EffectSet& fx) {
    const auto& p = ctx.envelope.payload;
    const Tick start = p.integer("start");
    const Tick end = p.integer("end");
    const Tick res = p.integer("resolution");
    auto seg = ctx.context.series(ctx.self.id, kTemperatureKey, start, end, res);
    fx.write(kDailyTemperatureKey, std::move(seg), start, policy(aggregate_scope(), 3 * kDay, false));
  });
  return b;
}

BehaviorTable consumer_behavior() {
  BehaviorTable b(kind::kConsumer);
  b.on("profile", [](const HandlerContext& ctx, EffectSet& fx) { fx.set("name", ctx.envelope.payload.text("name")); });
  return b;
}

}  // namespace

void register_grid_behaviors(ActorRuntime& runtime) {
  runtime.register_behavior(meter_behavior());
  runtime.register_behavior(substation_behavior());
  runtime.register_behavior(switch_behavior());
  runtime.register_behavior(station_behavior());
  runtime.register_behavior(consumer_behavior());
}

std::optional<ActorId> upstream_substation(const GraphRegistry& graph, const ActorId& meter, Tick t) {
  ActorId cur = meter;
  for (int depth = 0; depth < 16; ++depth) {
    auto parents = graph.parents(cur, rel::kFeeds, t);
    if (parents.empty()) return std::nullopt;
    cur = parents.front();
    if (cur.kind == kind::kSubstation) return cur;
  }
  return std::nullopt;
}

Grid build_grid(ActorRuntime& runtime, const GridSpec& spec) {
  validate(spec);
  if (!runtime.has_behavior(kind::kMeter)) register_grid_behaviors(runtime);
  const Tick now = runtime.clock().now();
  auto& graph = runtime.graph();
  Grid g;

  for (int f = 0; f < spec.feeders; ++f) {
    g.substations.push_back(runtime.spawn(kind::kSubstation, substation_id(f).local_id, {}, geo_attrs(substation_geo(f))));
  }

  // Blocks are carved from the tail of feeder_a, in switch order.
  std::vector<int> tail(static_cast<std::size_t>(spec.feeders), spec.meters_per_feeder);
  std::vector<std::pair<int, int>> block_range;  // [first, last) meter index per switch
  for (const auto& t : spec.tie_switches) {
    tail[t.feeder_a] -= t.block_size;
    block_range.emplace_back(tail[t.feeder_a], tail[t.feeder_a] + t.block_size);
  }
  for (std::size_t i = 0; i < spec.tie_switches.size(); ++i) {
    const auto& t = spec.tie_switches[i];
    const auto a = substation_geo(t.feeder_a);
    const auto b = substation_geo(t.feeder_b);
    Attributes attrs = geo_attrs({(a.lat + b.lat) / 2, (a.lon + b.lon) / 2});
    attrs["normal_parent"] = substation_id(t.feeder_a).str();
    attrs["alt_parent"] = substation_id(t.feeder_b).str();
    g.switches.push_back(runtime.spawn(kind::kSwitch, switch_id(static_cast<int>(i)).local_id,
                                       {{"state", std::string("open")}}, std::move(attrs)));
  }
  g.switch_blocks.resize(spec.tie_switches.size());

  g.feeder_meters.resize(static_cast<std::size_t>(spec.feeders));
  for (int f = 0; f < spec.feeders; ++f) {
    const auto base = substation_geo(f);
    for (int m = 0; m < spec.meters_per_feeder; ++m) {
      GeoPoint geo{base.lat + 0.004 * (1 + m / 10), base.lon + 0.004 * (m % 10 - 5)};
      auto id = runtime.spawn(kind::kMeter, meter_id(f, m).local_id, {}, geo_attrs(geo));
      g.feeder_meters[f].push_back(id);
      g.meters.push_back(id);
      g.home_feeder.emplace(id, f);
    }
  }
  for (const auto& w : spec.weather_stations) {
    Attributes attrs = geo_attrs(w.geo);
    attrs["sampling_period_h"] = static_cast<double>(w.sampling_period) / static_cast<double>(kHour);
    g.stations.push_back(runtime.spawn(kind::kStation, w.name, {}, std::move(attrs)));
  }

  for (std::size_t i = 0; i < spec.tie_switches.size(); ++i) {
    const auto& t = spec.tie_switches[i];
    graph.add_edge(g.substations[t.feeder_a], g.switches[i], rel::kFeeds, 1.0, now);
    for (int m = block_range[i].first; m < block_range[i].second; ++m) {
      const auto& id = g.feeder_meters[t.feeder_a][m];
      g.block_of.emplace(id, static_cast<int>(i));
      g.switch_blocks[i].push_back(id);
    }
  }
  for (int f = 0; f < spec.feeders; ++f) {
    for (const auto& id : g.feeder_meters[f]) {
      auto blk = g.block_of.find(id);
      const auto& parent = blk == g.block_of.end() ? g.substations[f] : g.switches[blk->second];
      graph.add_edge(parent, id, rel::kFeeds, 1.0, now);
    }
  }

  for (const auto& sub : g.substations) {
    auto station = graph.find_service(sub, kind::kStation, nullptr, now);
    graph.add_edge(sub, *station, rel::kNearby, 1.0, now);
    graph.subscribe(sub, *station, kTemperatureKey);
    runtime.send(kSystemActor, sub, Message{"resolve_nearby", {{"t", now}}});
  }
  for (std::size_t i = 0; i < spec.tie_switches.size(); ++i) {
    const auto& t = spec.tie_switches[i];
    graph.subscribe(g.substations[t.feeder_a], g.switches[i], "switch_state");
    graph.subscribe(g.substations[t.feeder_b], g.switches[i], "switch_state");
  }
  runtime.drain();
  return g;
}

namespace {

double gaussian(std::mt19937_64& rng, double sd) {
  if (sd == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sd)(rng);
}

}  // namespace

TimeSeriesSegment synth_weather(const std::string& station, int days, std::uint64_t seed, const WeatherParams& params) {
  if (days < 0) throw Error(ErrorCode::InvalidArgument, "days must be >= 0");
  std::mt19937_64 rng(mix_seed(seed, "weather/" + station));
  TimeSeriesSegment seg{0, kHour, {}, "degC"};
  const int hours = days * 24;
  seg.samples.reserve(static_cast<std::size_t>(hours));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int h = 0; h < hours; ++h) {
    const double day = h / 24.0;
    const double seasonal = params.seasonal_amp * std::sin(two_pi * (day - 105.0) / 365.0);
    const double diurnal = params.diurnal_amp * std::sin(two_pi * ((h % 24) - 9) / 24.0);
    seg.samples.push_back(params.mean + seasonal + diurnal + gaussian(rng, params.noise_sd));
  }
  return seg;
}

TimeSeriesSegment synth_consumption(const ActorId& meter, const TimeSeriesSegment& weather,
                                    const ConsumptionParams& params, std::uint64_t seed) {
  if (weather.resolution > kHour || kHour % weather.resolution != 0) {
    throw Error(ErrorCode::ResolutionTooCoarse, "weather resolution must divide one hour");
  }
  if (weather.start % kHour != 0) throw Error(ErrorCode::InvalidArgument, "weather must start on an hour");
  std::mt19937_64 rng(mix_seed(seed, "consumption/" + meter.str()));
  const auto stride = static_cast<std::size_t>(kHour / weather.resolution);
  TimeSeriesSegment seg{weather.start, kHour, {}, "kWh"};
  for (std::size_t i = 0; i < weather.samples.size(); i += stride) {
    const auto hod = static_cast<std::size_t>((weather.time_of(i) / kHour) % 24);
    const double v = params.base_profile[hod] + params.temp_coeff * std::abs(weather.samples[i] - params.comfort_temp) +
                     gaussian(rng, params.noise_sd);
    seg.samples.push_back(std::max(0.0, v));
  }
  return seg;
}

double ols_r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "need paired samples");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return (sxy * sxy) / (sxx * syy);
}

std::vector<double> discomfort(const TimeSeriesSegment& weather, double comfort_temp) {
  const auto stride = static_cast<std::size_t>(kHour / weather.resolution);
  std::vector<double> out;
  for (std::size_t i = 0; i < weather.samples.size(); i += stride) out.push_back(std::abs(weather.samples[i] - comfort_temp));
  return out;
}

double calibration_r_squared(int days, std::uint64_t seed) {
  const auto params = default_consumption_params();
  auto weather = synth_weather("w0", days, seed);
  auto load = synth_consumption(meter_id(0, 0), weather, params, seed);
  return ols_r_squared(discomfort(weather, params.comfort_temp), load.samples);
}

std::vector<DrInterval> dr_intervals(const ActionLog& log, const ActorId& actor) {
  std::vector<DrInterval> out;
  for (const auto& e : log.entries()) {
    if (e.action != action::kDrCommand || e.actor != actor) continue;
    out.push_back({std::stoll(e.params.at("start")), std::stoll(e.params.at("end"))});
  }
  return out;
}

std::array<double, 24> baseline_excluding_actions(const TimeSeriesSegment& series, const ActionLog& log,
                                                  const ActorId& actor) {
  if (series.resolution != kHour) throw Error(ErrorCode::InvalidArgument, "baseline needs an hourly series");
  const auto intervals = dr_intervals(log, actor);
  std::array<double, 24> sum{};
  std::array<std::size_t, 24> count{};
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const Tick t = series.time_of(i);
    const bool excluded =
        std::any_of(intervals.begin(), intervals.end(), [&](const auto& d) { return d.start <= t && t < d.end; });
    if (excluded) continue;
    const auto hod = static_cast<std::size_t>(((t / kHour) % 24 + 24) % 24);
    sum[hod] += series.samples[i];
    ++count[hod];
  }
  std::array<double, 24> out{};
  for (std::size_t h = 0; h < 24; ++h) {
    if (count[h] == 0) throw Error(ErrorCode::AllExcluded, actor.str() + " has no clean sample at hour " + std::to_string(h));
    out[h] = sum[h] / static_cast<double>(count[h]);
  }
  return out;
}

void issue_dr_command(ActorRuntime& runtime, ActionLog& log, const ActorId& meter, double factor, Tick start,
                      Tick end) {
  runtime.send(kSystemActor, meter, Message{"dr_command", {{"factor", factor}, {"start", start}, {"end", end}}});
  log.append({runtime.clock().now(),
              meter,
              std::string(action::kDrCommand),
              {{"factor", format_double(factor)}, {"start", std::to_string(start)}, {"end", std::to_string(end)}}});
}

std::array<double, 24> consumer_baseline(const ActorRuntime& runtime, const ActorId& consumer, Tick start, Tick end) {
  const auto& graph = runtime.graph();
  std::set<ActorId> meters;
  for (const auto& e : graph.edges()) {
    if (e.type == rel::kMeasures && e.dst == consumer) meters.insert(e.src);
  }
  std::array<double, 24> sum{};
  std::array<std::size_t, 24> count{};
  for (const auto& m : meters) {
    for (const auto& e : graph.edges()) {
      if (e.type != rel::kMeasures || e.src != m || e.dst != consumer) continue;
      const Tick from = std::max(start, (e.valid_from + kHour - 1) / kHour * kHour);
      const Tick to = std::min(end, e.valid_to);
      if (from >= to) continue;
      const Tick last = (to - 1) / kHour * kHour + kHour;
      auto seg = runtime.context().series(m, kConsumptionKey, from, last, kHour);
      for (std::size_t i = 0; i < seg.samples.size(); ++i) {
        const Tick t = seg.time_of(i);
        if (!e.valid_at(t)) continue;
        const auto hod = static_cast<std::size_t>((t / kHour) % 24);
        sum[hod] += seg.samples[i];
        ++count[hod];
      }
    }
  }
  std::array<double, 24> out{};
  for (std::size_t h = 0; h < 24; ++h) {
    out[h] = count[h] ? sum[h] / static_cast<double>(count[h]) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::string CostReport::to_text() const {
  std::ostringstream out;
  out << "total_ns = " << total_ns << '\n';
  out << "message_ns = " << message_ns << '\n';
  out << "snapshot_ns = " << snapshot_ns << '\n';
  out << "local_messages = " << local_messages << '\n';
  out << "cross_messages = " << cross_messages << '\n';
  out << "snapshots = " << snapshots << '\n';
  for (std::size_t s = 0; s < per_silo.size(); ++s) {
    out << "silo " << s << " sent = " << per_silo[s].sent << " received = " << per_silo[s].received
        << " snapshots = " << per_silo[s].snapshots << '\n';
  }
  return out.str();
}

CostReport cost_report(const MessageTrace& trace, const Assignment& assignment, const CostModel& model) {
  std::vector<int> silo(trace.actors.size());
  for (std::size_t i = 0; i < trace.actors.size(); ++i) {
    auto it = assignment.silo_of.find(trace.actors[i]);
    if (it == assignment.silo_of.end()) throw Error(ErrorCode::UnknownActorInTrace, trace.actors[i].str());
    silo[i] = it->second;
  }
  CostReport r;
  r.per_silo.resize(static_cast<std::size_t>(std::max(assignment.k, 1)));
  for (const auto& ev : trace.events) {
    if (ev.src >= silo.size() || ev.dst >= silo.size()) throw Error(ErrorCode::UnknownActorInTrace, "bad trace index");
    const int a = silo[ev.src];
    const int b = silo[ev.dst];
    if (ev.kind == TraceEvent::Kind::Message) {
      const bool cross = a != b;
      r.message_ns += model.message(cross);
      (cross ? r.cross_messages : r.local_messages) += 1;
      ++r.per_silo[a].sent;
      ++r.per_silo[b].received;
    } else {
      r.snapshot_ns += model.snapshot(ev.bytes);
      ++r.snapshots;
      ++r.per_silo[a].snapshots;
    }
  }
  r.total_ns = r.message_ns + r.snapshot_ns;
  return r;
}

void write_series_csv(const TimeSeriesSegment& series, std::ostream& out) {
  out << "timestamp,value,unit\n";
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    out << series.time_of(i) << ',' << format_double(series.samples[i]) << ',' << series.unit << '\n';
  }
}

TimeSeriesSegment read_series_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "timestamp,value,unit") {
    throw Error(ErrorCode::ParseError, "expected header timestamp,value,unit");
  }
  TimeSeriesSegment seg;
  std::vector<Tick> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw Error(ErrorCode::ParseError, "bad csv line: " + line);
    try {
      times.push_back(std::stoll(line.substr(0, c1)));
      seg.samples.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad csv line: " + line);
    }
    auto unit = line.substr(c2 + 1);
    if (times.size() == 1) {
      seg.unit = unit;
    } else if (unit != seg.unit) {
      throw Error(ErrorCode::ParseError, "mixed units in csv");
    }
  }
  if (times.empty()) return seg;
  seg.start = times.front();
  seg.resolution = times.size() > 1 ? times[1] - times[0] : kHour;
  if (seg.resolution <= 0) throw Error(ErrorCode::ParseError, "timestamps must increase");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] - times[i - 1] != seg.resolution) throw Error(ErrorCode::ParseError, "non-uniform timestamps");
  }
  return seg;
}

}  // namespace gova
