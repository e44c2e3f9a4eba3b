#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gova/actor_runtime.hpp"
#include "gova/cost_model.hpp"
#include "gova/grid_config.hpp"
#include "gova/placement.hpp"
#include "gova/propagation.hpp"

namespace gova {

namespace kind {
inline const std::string kSubstation = "substation";
inline const std::string kMeter = "meter";
inline const std::string kSwitch = "switch";
inline const std::string kStation = "weather_station";
inline const std::string kConsumer = "consumer";
}  // namespace kind

// Context keys written by the grid behaviours.
inline const std::string kTemperatureKey = "temperature";
inline const std::string kTemperatureFeatureKey = "temperature_feature";
inline const std::string kDailyTemperatureKey = "daily_temperature";
inline const std::string kLocationKey = "location";

struct Grid {
  std::vector<ActorId> substations;                 // index = feeder
  std::vector<std::vector<ActorId>> feeder_meters;  // meters in feeder order
  std::vector<ActorId> meters;                      // all meters, feeder-major
  std::vector<ActorId> switches;                    // index = tie switch
  std::vector<std::vector<ActorId>> switch_blocks;  // meters behind each switch
  std::vector<ActorId> stations;                    // index = weather station
  std::map<ActorId, int> home_feeder;               // meter -> feeder it is wired to by default
  std::map<ActorId, int> block_of;                  // meter -> switch index, for blocked meters
};

ActorId substation_id(int feeder);
ActorId meter_id(int feeder, int index);
ActorId switch_id(int index);
ActorId station_id(const std::string& name);
ActorId consumer_id(const std::string& name);

GeoPoint substation_geo(int feeder);

// Behaviour tables for every grid kind.
void register_grid_behaviors(ActorRuntime& runtime);

// Spawns actors, wires feeds/nearby edges and subscriptions at the current
// virtual time. Throws InvalidSpec.
Grid build_grid(ActorRuntime& runtime, const GridSpec& spec);

// Upstream substation of a meter along feeds edges valid at `t`.
std::optional<ActorId> upstream_substation(const GraphRegistry& graph, const ActorId& meter, Tick t);

struct WeatherParams {
  double mean = 10.0;
  double seasonal_amp = 8.0;
  double diurnal_amp = 4.0;
  double noise_sd = 1.5;
};

// Hourly temperatures from hour 0 over `days`: seasonal + diurnal + noise.
TimeSeriesSegment synth_weather(const std::string& station, int days, std::uint64_t seed,
                                const WeatherParams& params = {});

// consumption[h] = max(0, base[h mod 24] + temp_coeff * |T(h) - comfort| + noise).
// Throws ResolutionTooCoarse when the weather is coarser than hourly.
TimeSeriesSegment synth_consumption(const ActorId& meter, const TimeSeriesSegment& weather,
                                    const ConsumptionParams& params, std::uint64_t seed);

// Coefficient of determination of y ~ a + b x.
double ols_r_squared(const std::vector<double>& x, const std::vector<double>& y);

// Discomfort feature |T - comfort| aligned with an hourly consumption series.
std::vector<double> discomfort(const TimeSeriesSegment& weather, double comfort_temp);

// R^2 of default consumption against discomfort for one meter.
double calibration_r_squared(int days, std::uint64_t seed);

struct DrInterval {
  Tick start = 0;
  Tick end = 0;
};

std::vector<DrInterval> dr_intervals(const ActionLog& log, const ActorId& actor);

// Per-hour-of-day mean of hourly samples outside every DR interval of `actor`.
// Throws AllExcluded when an hour of day has no clean sample.
std::array<double, 24> baseline_excluding_actions(const TimeSeriesSegment& series, const ActionLog& log,
                                                  const ActorId& actor);

// Issues a DR command to a meter and logs it.
void issue_dr_command(ActorRuntime& runtime, ActionLog& log, const ActorId& meter, double factor, Tick start,
                      Tick end);

// Per-hour-of-day mean of readings attributed to `consumer` through measures
// edges valid at each reading's time.
std::array<double, 24> consumer_baseline(const ActorRuntime& runtime, const ActorId& consumer, Tick start, Tick end);

struct SiloCounts {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t snapshots = 0;
};

struct CostReport {
  Tick total_ns = 0;
  Tick message_ns = 0;
  Tick snapshot_ns = 0;
  std::uint64_t local_messages = 0;
  std::uint64_t cross_messages = 0;
  std::uint64_t snapshots = 0;
  std::vector<SiloCounts> per_silo;

  [[nodiscard]] std::string to_text() const;
};

// Charges every traced message and snapshot under `assignment`.
// Throws UnknownActorInTrace when a traced actor is unassigned.
CostReport cost_report(const MessageTrace& trace, const Assignment& assignment, const CostModel& model = {});

// `timestamp,value,unit` with a header line.
void write_series_csv(const TimeSeriesSegment& series, std::ostream& out);
TimeSeriesSegment read_series_csv(std::istream& in);

}  // namespace gova
