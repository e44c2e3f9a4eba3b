#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gova/graph_registry.hpp"
#include "gova/types.hpp"

namespace gova {

// Meters `block_size` at the tail of feeder_a sit behind a normally-open
// switch that can transfer them to feeder_b.
struct TieSwitchSpec {
  int feeder_a = 0;
  int feeder_b = 1;
  int block_size = 0;
};

struct StationSpec {
  std::string name;
  GeoPoint geo;
  Tick sampling_period = kHour;
};

struct ConsumptionParams {
  std::array<double, 24> base_profile{};  // kWh per hour of day
  double temp_coeff = 0.0;                // kWh per degC away from comfort
  double comfort_temp = 18.0;
  double noise_sd = 0.0;                  // kWh
};

ConsumptionParams default_consumption_params();

struct GridSpec {
  int feeders = 3;
  int meters_per_feeder = 50;
  std::vector<TieSwitchSpec> tie_switches;
  std::vector<StationSpec> weather_stations;
  int days = 60;
  std::uint64_t seed = 42;
  ConsumptionParams consumption = default_consumption_params();
  double dr_factor = 0.5;
};

// 3 feeders x 50 meters, 4 tie switches, 2 weather stations.
GridSpec demo_grid_spec();

// Throws InvalidSpec.
void validate(const GridSpec& spec);

std::size_t expected_actor_count(const GridSpec& spec);
std::size_t expected_edge_count(const GridSpec& spec);

// Plain-text config: `key = value` lines grouped by `[section]` headers.
// Keys may repeat; '#' starts a comment.
struct ConfigSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
};
std::vector<ConfigSection> parse_config(std::istream& in);

GridSpec read_grid_spec(std::istream& in);
void write_grid_spec(const GridSpec& spec, std::ostream& out);

// Durations in config files: plain number = hours, or suffixed s/m/h/d.
Tick parse_duration(const std::string& text);

}  // namespace gova
