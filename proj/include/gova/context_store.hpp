#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gova/clock.hpp"
#include "gova/record_log.hpp"
#include "gova/types.hpp"

namespace gova {

struct Scalar {
  double value = 0.0;
  std::string unit;

  bool operator==(const Scalar&) const = default;
};

// Uniform-resolution run of samples starting at `start`.
struct TimeSeriesSegment {
  Tick start = 0;
  Tick resolution = kHour;
  std::vector<double> samples;
  std::string unit;

  [[nodiscard]] Tick end() const { return start + resolution * static_cast<Tick>(samples.size()); }
  [[nodiscard]] Tick time_of(std::size_t i) const { return start + resolution * static_cast<Tick>(i); }

  bool operator==(const TimeSeriesSegment&) const = default;
};

struct Blob {
  std::string bytes;

  bool operator==(const Blob&) const = default;
};

using ContextValue = std::variant<Scalar, TimeSeriesSegment, Blob>;

std::string encode_value(const ContextValue& v);
// Throws MissingUnit for unit-less scalars and series.
void check_context_value(const ContextValue& v);
ContextValue decode_value(std::string_view bytes);

// Set of application tags allowed to read a context item. Immutable and
// cheap to copy; records of one stream share a single instance.
class Scope {
 public:
  Scope() = default;
  Scope(std::initializer_list<std::string> tags) : Scope(std::set<std::string>(tags)) {}
  explicit Scope(const std::set<std::string>& tags)
      : tags_(std::make_shared<const std::vector<std::string>>(tags.begin(), tags.end())) {}

  [[nodiscard]] bool contains(std::string_view tag) const;
  [[nodiscard]] std::vector<std::string> tags() const { return tags_ ? *tags_ : std::vector<std::string>{}; }

 private:
  std::shared_ptr<const std::vector<std::string>> tags_;  // sorted
};

// Exponentially decayed access counter: halves per half_life of idle time.
struct DecayedCounter {
  double value = 0.0;
  Tick half_life = 24 * kHour;
  Tick last_update = 0;

  [[nodiscard]] double at(Tick now) const;
};

struct RelevancePolicy {
  Scope scope;
  std::optional<Tick> period;  // nullopt = Infinite (profile data)
  bool deletable = false;
  DecayedCounter intensity;

  [[nodiscard]] bool infinite() const { return !period.has_value(); }
};

// counter · 2^(−Δt/half_life) + 1, stamped at `now`.
DecayedCounter record_access(const RelevancePolicy& policy, Tick now);
DecayedCounter record_access(const DecayedCounter& counter, Tick now);

enum class Tier : std::uint8_t { Hot = 0, Warm = 1, Cold = 2 };
std::string_view to_string(Tier t);

struct ContextRecord {
  ActorId owner;
  std::string key;
  ContextValue value;
  Tick timestamp = 0;
  RelevancePolicy policy;
  Tier tier = Tier::Hot;
  bool downsampled = false;
};

struct TierThresholds {
  double hot_min = 2.0;
  double cold_max = 0.25;
};

Tier classify_temperature(const ContextRecord& record, Tick now, const TierThresholds& thresholds);
Tier classify_intensity(double intensity, const TierThresholds& thresholds);

// Block means; a trailing partial block is averaged over its own length.
TimeSeriesSegment downsample(const TimeSeriesSegment& segment, int factor);

struct MaintenanceAction {
  std::string verb;  // delete | demote | compress | downsample | evict
  ActorId owner;
  std::string key;
  Tick timestamp = 0;
  Tier from = Tier::Hot;
  std::optional<Tier> to;  // nullopt for deletions
};

struct MaintenanceReport {
  std::vector<MaintenanceAction> actions;
  std::vector<std::string> skipped;  // "owner key@t reason"
  std::size_t hot_bytes_after = 0;

  [[nodiscard]] std::size_t count(std::string_view verb) const;
  // One action per line: verb, owner, key@timestamp, tier-from, tier-to.
  [[nodiscard]] std::string to_text() const;
};

struct ContextStoreConfig {
  TierThresholds thresholds;
  Tick default_half_life = 24 * kHour;
  std::size_t hot_cap_bytes = std::numeric_limits<std::size_t>::max();
  int downsample_factor = 4;
};

// Read-only description of a stored record, for audits.
struct RecordInfo {
  const ActorId& owner;
  const std::string& key;
  Tick timestamp;
  const RelevancePolicy& policy;
  Tier tier;
  bool downsampled;
  std::size_t bytes;
};

// Per-actor context with relevance-driven hot/warm/cold tiering. Hot values
// live in memory; warm values are stored uncompressed in the record log;
// cold values are compressed (and time series eventually downsampled).
class ContextStore {
 public:
  explicit ContextStore(const VirtualClock& clock, ContextStoreConfig config = {}, RecordLog* backing = nullptr);

  ContextStore(const ContextStore&) = delete;
  ContextStore& operator=(const ContextStore&) = delete;

  void register_owner(const ActorId& owner);
  [[nodiscard]] bool has_owner(const ActorId& owner) const { return owners_.contains(owner); }

  // Stores a version at `timestamp`; a version at the same timestamp is replaced.
  ContextRecord put(const ActorId& owner, std::string_view key, ContextValue value, Tick timestamp,
                    RelevancePolicy policy);

  // Latest version with timestamp <= as_of (latest overall without as_of).
  // Counts an access and promotes the record when it turns hot.
  ContextRecord get(const ActorId& owner, std::string_view key, std::optional<Tick> as_of,
                    std::string_view reader_scope);

  // Owner/system read path: no scope check, no access accounting.
  [[nodiscard]] std::optional<ContextRecord> peek(const ActorId& owner, std::string_view key,
                                                  std::optional<Tick> as_of = std::nullopt) const;

  // Samples of `key` on the grid [start, end) at `resolution`, assembled from
  // scalar versions or stored segments. NotFound on gaps; InsufficientRetention
  // when the stored data is coarser than `resolution`.
  [[nodiscard]] TimeSeriesSegment series(const ActorId& owner, std::string_view key, Tick start, Tick end,
                                         Tick resolution) const;

  [[nodiscard]] std::vector<Tick> versions(const ActorId& owner, std::string_view key) const;

  MaintenanceReport maintain(Tick now);

  // Explicit tier moves (maintenance and tests).
  void demote(const ActorId& owner, std::string_view key, Tick timestamp, Tier to);
  void promote(const ActorId& owner, std::string_view key, Tick timestamp);

  [[nodiscard]] std::size_t hot_bytes() const { return hot_bytes_; }
  [[nodiscard]] std::size_t record_count() const;
  [[nodiscard]] const ContextStoreConfig& config() const { return config_; }
  void set_config(const ContextStoreConfig& config) { config_ = config; }

  void for_each_record(const std::function<void(const RecordInfo&)>& fn) const;

 private:
  struct Entry {
    Tick timestamp = 0;
    RelevancePolicy policy;
    Tier tier = Tier::Hot;
    bool downsampled = false;
    std::optional<ContextValue> hot_value;
    std::uint64_t offset = 0;  // valid when not hot
    std::size_t bytes = 0;     // encoded value size
  };
  using Versions = std::vector<Entry>;  // sorted by timestamp
  using KeyMap = std::map<std::string, Versions, std::less<>>;

  [[nodiscard]] const Versions* find_versions(const ActorId& owner, std::string_view key) const;
  Versions* find_versions(const ActorId& owner, std::string_view key);
  [[nodiscard]] ContextValue load(const ActorId& owner, std::string_view key, const Entry& e) const;
  [[nodiscard]] ContextRecord materialize(const ActorId& owner, std::string_view key, const Entry& e) const;
  void move_tier(const ActorId& owner, std::string_view key, Entry& e, Tier to);
  Entry& entry_at(const ActorId& owner, std::string_view key, Tick timestamp);

  const VirtualClock& clock_;
  ContextStoreConfig config_;
  std::unique_ptr<RecordLog> owned_log_;
  RecordLog* log_;
  std::map<ActorId, KeyMap> owners_;
  std::size_t hot_bytes_ = 0;
};

}  // namespace gova
