#include "gova/grid_config.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace gova {

ConsumptionParams default_consumption_params() {
  ConsumptionParams p;
  p.base_profile = {0.35, 0.30, 0.28, 0.27, 0.28, 0.33, 0.50, 0.70, 0.65, 0.55, 0.50, 0.50,
                    0.52, 0.50, 0.48, 0.50, 0.60, 0.85, 1.10, 1.15, 1.00, 0.85, 0.65, 0.45};
  p.temp_coeff = 0.15;
  p.comfort_temp = 18.0;
  p.noise_sd = 0.2;
  return p;
}

GridSpec demo_grid_spec() {
  GridSpec s;
  s.tie_switches = {{0, 1, 25}, {1, 2, 10}, {2, 0, 10}, {1, 0, 5}};
  s.weather_stations = {{"w0", {52.02, 4.05}, 3 * kHour}, {"w1", {51.98, 4.38}, 3 * kHour}};
  return s;
}

void validate(const GridSpec& spec) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
  if (spec.feeders < 1) fail("feeders must be >= 1");
  if (spec.meters_per_feeder < 1) fail("meters_per_feeder must be >= 1");
  if (spec.days < 1) fail("days must be >= 1");
  if (spec.weather_stations.empty()) fail("at least one weather station is required");
  std::vector<int> blocked(static_cast<std::size_t>(spec.feeders), 0);
  for (const auto& t : spec.tie_switches) {
    if (t.feeder_a < 0 || t.feeder_a >= spec.feeders || t.feeder_b < 0 || t.feeder_b >= spec.feeders) {
      fail("tie switch feeder out of range");
    }
    if (t.feeder_a == t.feeder_b) fail("tie switch must join two different feeders");
    if (t.block_size < 0) fail("tie switch block_size must be >= 0");
    blocked[t.feeder_a] += t.block_size;
    if (blocked[t.feeder_a] > spec.meters_per_feeder) fail("tie switch blocks exceed meters_per_feeder");
  }
  std::set<std::string> names;
  for (const auto& w : spec.weather_stations) {
    if (w.name.empty() || !names.insert(w.name).second) fail("weather station names must be unique and non-empty");
    if (w.sampling_period <= 0 || (kHour % w.sampling_period != 0 && w.sampling_period % kHour != 0)) {
      fail("sampling period must divide or be a multiple of one hour");
    }
  }
  for (double b : spec.consumption.base_profile) {
    if (b < 0) fail("base_profile must be >= 0");
  }
  if (spec.consumption.noise_sd < 0) fail("noise_sd must be >= 0");
  if (spec.dr_factor < 0 || spec.dr_factor > 1) fail("dr_factor must be in [0, 1]");
}

std::size_t expected_actor_count(const GridSpec& spec) {
  const auto f = static_cast<std::size_t>(spec.feeders);
  return f + f * static_cast<std::size_t>(spec.meters_per_feeder) + spec.tie_switches.size() +
         spec.weather_stations.size();
}

std::size_t expected_edge_count(const GridSpec& spec) {
  const auto f = static_cast<std::size_t>(spec.feeders);
  // feeds into every meter, one parent edge per switch, one nearby edge per substation
  return f * static_cast<std::size_t>(spec.meters_per_feeder) + spec.tie_switches.size() + f;
}

namespace {

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw Error(ErrorCode::ParseError, "not a number: " + s);
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw Error(ErrorCode::ParseError, "not an integer: " + s);
  return v;
}

std::vector<std::string> words(const std::string& s, char sep = ' ') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string w;
  while (std::getline(ss, w, sep)) {
    w = trim(w);
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

}  // namespace

Tick parse_duration(const std::string& text) {
  auto t = trim(text);
  if (t.empty()) throw Error(ErrorCode::ParseError, "empty duration");
  Tick unit = kHour;
  switch (t.back()) {
    case 's': unit = kSecond; t.pop_back(); break;
    case 'm': unit = kMinute; t.pop_back(); break;
    case 'h': unit = kHour; t.pop_back(); break;
    case 'd': unit = kDay; t.pop_back(); break;
    default: break;
  }
  const double v = to_double(t);
  if (v < 0) throw Error(ErrorCode::ParseError, "negative duration: " + text);
  return static_cast<Tick>(std::llround(v * static_cast<double>(unit)));
}

std::vector<ConfigSection> parse_config(std::istream& in) {
  std::vector<ConfigSection> out{{"", {}}};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": bad section");
      out.push_back({trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    out.back().entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

GridSpec read_grid_spec(std::istream& in) {
  GridSpec s;
  s.tie_switches.clear();
  s.weather_stations.clear();
  for (const auto& sec : parse_config(in)) {
    for (const auto& [key, value] : sec.entries) {
      const auto where = "[" + sec.name + "] " + key;
      if (sec.name == "grid") {
        if (key == "feeders") s.feeders = static_cast<int>(to_int(value));
        else if (key == "meters_per_feeder") s.meters_per_feeder = static_cast<int>(to_int(value));
        else if (key == "days") s.days = static_cast<int>(to_int(value));
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_int(value));
        else throw Error(ErrorCode::ParseError, "unknown key " + where);
      } else if (sec.name == "tie_switch") {
        if (key != "tie") throw Error(ErrorCode::ParseError, "unknown key " + where);
        auto w = words(value);
        if (w.size() != 3) throw Error(ErrorCode::ParseError, where + " expects: feeder_a feeder_b block_size");
        s.tie_switches.push_back(
            {static_cast<int>(to_int(w[0])), static_cast<int>(to_int(w[1])), static_cast<int>(to_int(w[2]))});
      } else if (sec.name == "weather_station") {
        if (key != "station") throw Error(ErrorCode::ParseError, "unknown key " + where);
        auto w = words(value);
        if (w.size() != 4) throw Error(ErrorCode::ParseError, where + " expects: name lat lon sampling_period");
        s.weather_stations.push_back({w[0], {to_double(w[1]), to_double(w[2])}, parse_duration(w[3])});
      } else if (sec.name == "consumption") {
        if (key == "base_profile") {
          auto w = words(value, ',');
          if (w.size() != 24) throw Error(ErrorCode::ParseError, where + " needs 24 values");
          for (std::size_t i = 0; i < 24; ++i) s.consumption.base_profile[i] = to_double(w[i]);
        } else if (key == "temp_coeff") {
          s.consumption.temp_coeff = to_double(value);
        } else if (key == "comfort_temp") {
          s.consumption.comfort_temp = to_double(value);
        } else if (key == "noise_sd") {
          s.consumption.noise_sd = to_double(value);
        } else {
          throw Error(ErrorCode::ParseError, "unknown key " + where);
        }
      } else if (sec.name == "behavior") {
        if (key == "dr_factor") s.dr_factor = to_double(value);
        else throw Error(ErrorCode::ParseError, "unknown key " + where);
      }
      // Other sections (e.g. [run]) belong to other readers.
    }
  }
  validate(s);
  return s;
}

void write_grid_spec(const GridSpec& spec, std::ostream& out) {
  out << "[grid]\n";
  out << "feeders = " << spec.feeders << '\n';
  out << "meters_per_feeder = " << spec.meters_per_feeder << '\n';
  out << "days = " << spec.days << '\n';
  out << "seed = " << spec.seed << '\n';
  out << "\n[tie_switch]\n";
  for (const auto& t : spec.tie_switches) out << "tie = " << t.feeder_a << ' ' << t.feeder_b << ' ' << t.block_size << '\n';
  out << "\n[weather_station]\n";
  for (const auto& w : spec.weather_stations) {
    out << "station = " << w.name << ' ' << format_double(w.geo.lat) << ' ' << format_double(w.geo.lon) << ' '
        << format_double(static_cast<double>(w.sampling_period) / static_cast<double>(kHour)) << "h\n";
  }
  out << "\n[consumption]\nbase_profile = ";
  for (std::size_t i = 0; i < 24; ++i) out << (i ? "," : "") << format_double(spec.consumption.base_profile[i]);
  out << '\n';
  out << "temp_coeff = " << format_double(spec.consumption.temp_coeff) << '\n';
  out << "comfort_temp = " << format_double(spec.consumption.comfort_temp) << '\n';
  out << "noise_sd = " << format_double(spec.consumption.noise_sd) << '\n';
  out << "\n[behavior]\ndr_factor = " << format_double(spec.dr_factor) << '\n';
}

}  // namespace gova
