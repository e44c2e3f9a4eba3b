#include "gova/context_store.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace gova {

namespace {

enum ValueKind : std::uint8_t { kScalar = 0, kSeries = 1, kBlob = 2 };

int tier_rank(Tier t) { return static_cast<int>(t); }

}  // namespace

void check_context_value(const ContextValue& v) {
  if (auto s = std::get_if<Scalar>(&v); s && s->unit.empty()) {
    throw Error(ErrorCode::MissingUnit, "scalar context value without unit");
  }
  if (auto seg = std::get_if<TimeSeriesSegment>(&v)) {
    if (seg->unit.empty()) throw Error(ErrorCode::MissingUnit, "time series without unit");
    if (seg->resolution <= 0) throw Error(ErrorCode::InvalidArgument, "non-positive resolution");
  }
}

std::string encode_value(const ContextValue& v) {
  ByteWriter w;
  if (auto s = std::get_if<Scalar>(&v)) {
    w.u8(kScalar);
    w.f64(s->value);
    w.str(s->unit);
  } else if (auto seg = std::get_if<TimeSeriesSegment>(&v)) {
    w.u8(kSeries);
    w.i64(seg->start);
    w.i64(seg->resolution);
    w.str(seg->unit);
    w.u32(static_cast<std::uint32_t>(seg->samples.size()));
    for (double x : seg->samples) w.f64(x);
  } else {
    w.u8(kBlob);
    w.str(std::get<Blob>(v).bytes);
  }
  return std::move(w).bytes();
}

ContextValue decode_value(std::string_view bytes) {
  ByteReader r(bytes);
  switch (r.u8()) {
    case kScalar: {
      Scalar s;
      s.value = r.f64();
      s.unit = r.str();
      return s;
    }
    case kSeries: {
      TimeSeriesSegment seg;
      seg.start = r.i64();
      seg.resolution = r.i64();
      seg.unit = r.str();
      auto n = r.u32();
      seg.samples.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) seg.samples.push_back(r.f64());
      return seg;
    }
    case kBlob:
      return Blob{r.str()};
    default:
      throw Error(ErrorCode::CorruptSnapshot, "bad context value tag");
  }
}

bool Scope::contains(std::string_view tag) const {
  if (!tags_) return false;
  return std::binary_search(tags_->begin(), tags_->end(), tag, std::less<>{});
}

double DecayedCounter::at(Tick now) const {
  if (now <= last_update || value == 0.0) return value;
  const double dt = static_cast<double>(now - last_update);
  return value * std::exp2(-dt / static_cast<double>(half_life));
}

DecayedCounter record_access(const DecayedCounter& counter, Tick now) {
  note_op("context.record_access");
  if (now < counter.last_update) {
    throw Error(ErrorCode::ClockRegression, "access at " + std::to_string(now) + " before last update " +
                                                std::to_string(counter.last_update));
  }
  DecayedCounter out = counter;
  out.value = counter.at(now) + 1.0;
  out.last_update = now;
  return out;
}

DecayedCounter record_access(const RelevancePolicy& policy, Tick now) {
  return record_access(policy.intensity, now);
}

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::Hot: return "hot";
    case Tier::Warm: return "warm";
    case Tier::Cold: return "cold";
  }
  return "?";
}

Tier classify_intensity(double intensity, const TierThresholds& thresholds) {
  if (!(thresholds.hot_min > thresholds.cold_max)) {
    throw Error(ErrorCode::InvalidArgument, "hot_min must exceed cold_max");
  }
  if (intensity >= thresholds.hot_min) return Tier::Hot;
  if (intensity <= thresholds.cold_max) return Tier::Cold;
  return Tier::Warm;
}

Tier classify_temperature(const ContextRecord& record, Tick now, const TierThresholds& thresholds) {
  note_op("context.classify_temperature");
  return classify_intensity(record.policy.intensity.at(now), thresholds);
}

TimeSeriesSegment downsample(const TimeSeriesSegment& segment, int factor) {
  note_op("context.downsample");
  if (segment.samples.empty()) throw Error(ErrorCode::EmptySegment, "cannot downsample an empty segment");
  if (factor < 2) throw Error(ErrorCode::InvalidArgument, "downsample factor must be >= 2");
  TimeSeriesSegment out;
  out.start = segment.start;
  out.resolution = segment.resolution * factor;
  out.unit = segment.unit;
  const auto n = segment.samples.size();
  const auto f = static_cast<std::size_t>(factor);
  for (std::size_t i = 0; i < n; i += f) {
    const auto stop = std::min(n, i + f);
    double sum = 0.0;
    for (std::size_t j = i; j < stop; ++j) sum += segment.samples[j];
    out.samples.push_back(sum / static_cast<double>(stop - i));
  }
  return out;
}

std::size_t MaintenanceReport::count(std::string_view verb) const {
  return static_cast<std::size_t>(
      std::count_if(actions.begin(), actions.end(), [&](const auto& a) { return a.verb == verb; }));
}

std::string MaintenanceReport::to_text() const {
  std::ostringstream out;
  for (const auto& a : actions) {
    out << a.verb << '\t' << a.owner.str() << '\t' << a.key << '@' << a.timestamp << '\t' << to_string(a.from)
        << '\t' << (a.to ? std::string(to_string(*a.to)) : std::string("-")) << '\n';
  }
  for (const auto& s : skipped) out << "skip\t" << s << '\n';
  return out.str();
}

ContextStore::ContextStore(const VirtualClock& clock, ContextStoreConfig config, RecordLog* backing)
    : clock_(clock), config_(config), log_(backing) {
  if (log_ == nullptr) {
    owned_log_ = std::make_unique<RecordLog>();
    log_ = owned_log_.get();
  }
}

void ContextStore::register_owner(const ActorId& owner) { owners_.try_emplace(owner); }

const ContextStore::Versions* ContextStore::find_versions(const ActorId& owner, std::string_view key) const {
  auto o = owners_.find(owner);
  if (o == owners_.end()) throw Error(ErrorCode::UnknownActor, owner.str());
  auto k = o->second.find(key);
  return k == o->second.end() ? nullptr : &k->second;
}

ContextStore::Versions* ContextStore::find_versions(const ActorId& owner, std::string_view key) {
  return const_cast<Versions*>(std::as_const(*this).find_versions(owner, key));
}

ContextRecord ContextStore::put(const ActorId& owner, std::string_view key, ContextValue value, Tick timestamp,
                                RelevancePolicy policy) {
  note_op("context.put");
  auto o = owners_.find(owner);
  if (o == owners_.end()) throw Error(ErrorCode::UnknownActor, owner.str());
  check_context_value(value);

  Entry e;
  e.timestamp = timestamp;
  e.policy = std::move(policy);
  if (e.policy.intensity.half_life <= 0) e.policy.intensity.half_life = config_.default_half_life;
  e.policy.intensity.value = 1.0;
  e.policy.intensity.last_update = clock_.now();
  e.bytes = encode_value(value).size();
  e.hot_value = std::move(value);

  auto& versions = o->second[std::string(key)];
  auto it = std::lower_bound(versions.begin(), versions.end(), timestamp,
                             [](const Entry& x, Tick t) { return x.timestamp < t; });
  if (it != versions.end() && it->timestamp == timestamp) {
    if (it->tier == Tier::Hot) hot_bytes_ -= it->bytes;
    *it = std::move(e);
  } else {
    it = versions.insert(it, std::move(e));
  }
  hot_bytes_ += it->bytes;
  return materialize(owner, key, *it);
}

ContextValue ContextStore::load(const ActorId& owner, std::string_view key, const Entry& e) const {
  if (e.hot_value) return *e.hot_value;
  ByteReader r(log_->read(e.offset));
  const bool compressed = r.u8() != 0;
  auto stored_owner = r.actor();
  auto stored_key = r.str();
  auto stored_ts = r.i64();
  auto data = r.str();
  if (stored_owner != owner || stored_key != key || stored_ts != e.timestamp) {
    throw Error(ErrorCode::CorruptSnapshot, "context record header mismatch for " + owner.str() + " " +
                                                std::string(key));
  }
  return decode_value(compressed ? decompress_bytes(data) : data);
}

ContextRecord ContextStore::materialize(const ActorId& owner, std::string_view key, const Entry& e) const {
  return ContextRecord{owner, std::string(key), load(owner, key, e), e.timestamp, e.policy, e.tier, e.downsampled};
}

void ContextStore::move_tier(const ActorId& owner, std::string_view key, Entry& e, Tier to) {
  if (e.tier == to) return;
  auto value = load(owner, key, e);
  if (to == Tier::Hot) {
    e.hot_value = std::move(value);
    hot_bytes_ += e.bytes;
  } else {
    auto raw = encode_value(value);
    ByteWriter w;
    w.u8(to == Tier::Cold ? 1 : 0);
    w.actor(owner);
    w.str(key);
    w.i64(e.timestamp);
    w.str(to == Tier::Cold ? compress_bytes(raw) : raw);
    e.offset = log_->append(w.bytes());
    if (e.tier == Tier::Hot) hot_bytes_ -= e.bytes;
    e.hot_value.reset();
  }
  e.tier = to;
}

ContextStore::Entry& ContextStore::entry_at(const ActorId& owner, std::string_view key, Tick timestamp) {
  auto* versions = find_versions(owner, key);
  if (versions != nullptr) {
    auto it = std::lower_bound(versions->begin(), versions->end(), timestamp,
                               [](const Entry& x, Tick t) { return x.timestamp < t; });
    if (it != versions->end() && it->timestamp == timestamp) return *it;
  }
  throw Error(ErrorCode::NotFound, owner.str() + " " + std::string(key) + "@" + std::to_string(timestamp));
}

void ContextStore::demote(const ActorId& owner, std::string_view key, Tick timestamp, Tier to) {
  auto& e = entry_at(owner, key, timestamp);
  if (tier_rank(to) < tier_rank(e.tier)) throw Error(ErrorCode::InvalidArgument, "demote cannot raise a tier");
  move_tier(owner, key, e, to);
}

void ContextStore::promote(const ActorId& owner, std::string_view key, Tick timestamp) {
  move_tier(owner, key, entry_at(owner, key, timestamp), Tier::Hot);
}

ContextRecord ContextStore::get(const ActorId& owner, std::string_view key, std::optional<Tick> as_of,
                                std::string_view reader_scope) {
  note_op("context.get");
  auto* versions = find_versions(owner, key);
  if (versions == nullptr || versions->empty()) {
    throw Error(ErrorCode::NotFound, owner.str() + " " + std::string(key));
  }
  auto it = versions->end();
  if (as_of) {
    it = std::upper_bound(versions->begin(), versions->end(), *as_of,
                          [](Tick t, const Entry& x) { return t < x.timestamp; });
  }
  if (it == versions->begin()) {
    throw Error(ErrorCode::NotFound, owner.str() + " " + std::string(key) + " before " + std::to_string(*as_of));
  }
  auto& e = *std::prev(it);
  if (!e.policy.scope.contains(reader_scope)) {
    throw Error(ErrorCode::ScopeDenied, std::string(reader_scope) + " may not read " + std::string(key));
  }
  e.policy.intensity = record_access(e.policy, clock_.now());
  if (e.tier != Tier::Hot &&
      classify_intensity(e.policy.intensity.at(clock_.now()), config_.thresholds) == Tier::Hot) {
    move_tier(owner, key, e, Tier::Hot);
  }
  return materialize(owner, key, e);
}

std::optional<ContextRecord> ContextStore::peek(const ActorId& owner, std::string_view key,
                                                std::optional<Tick> as_of) const {
  auto* versions = find_versions(owner, key);
  if (versions == nullptr || versions->empty()) return std::nullopt;
  auto it = versions->end();
  if (as_of) {
    it = std::upper_bound(versions->begin(), versions->end(), *as_of,
                          [](Tick t, const Entry& x) { return t < x.timestamp; });
  }
  if (it == versions->begin()) return std::nullopt;
  return materialize(owner, key, *std::prev(it));
}

TimeSeriesSegment ContextStore::series(const ActorId& owner, std::string_view key, Tick start, Tick end,
                                       Tick resolution) const {
  if (resolution <= 0 || end < start) throw Error(ErrorCode::InvalidArgument, "bad series window");
  auto* versions = find_versions(owner, key);
  TimeSeriesSegment out;
  out.start = start;
  out.resolution = resolution;
  if (versions == nullptr) throw Error(ErrorCode::NotFound, owner.str() + " " + std::string(key));

  std::size_t cached_index = std::numeric_limits<std::size_t>::max();
  std::optional<ContextValue> cached;
  for (Tick slot = start; slot < end; slot += resolution) {
    auto it = std::upper_bound(versions->begin(), versions->end(), slot,
                               [](Tick t, const Entry& x) { return t < x.timestamp; });
    if (it == versions->begin()) {
      throw Error(ErrorCode::NotFound, owner.str() + " " + std::string(key) + "@" + std::to_string(slot));
    }
    auto idx = static_cast<std::size_t>(std::distance(versions->begin(), it) - 1);
    const auto& e = (*versions)[idx];
    const ContextValue* v = nullptr;
    if (e.hot_value) {
      v = &*e.hot_value;
    } else {
      if (idx != cached_index) {
        cached = load(owner, key, e);
        cached_index = idx;
      }
      v = &*cached;
    }
    if (auto s = std::get_if<Scalar>(v)) {
      if (e.timestamp != slot) {
        throw Error(ErrorCode::NotFound, owner.str() + " " + std::string(key) + "@" + std::to_string(slot));
      }
      if (out.unit.empty()) out.unit = s->unit;
      out.samples.push_back(s->value);
    } else if (auto seg = std::get_if<TimeSeriesSegment>(v)) {
      if (slot >= seg->end()) {
        throw Error(ErrorCode::NotFound, owner.str() + " " + std::string(key) + "@" + std::to_string(slot));
      }
      if (seg->resolution > resolution) {
        throw Error(ErrorCode::InsufficientRetention,
                    owner.str() + " " + std::string(key) + " stored at coarser resolution");
      }
      if (seg->resolution != resolution || (slot - seg->start) % resolution != 0) {
        throw Error(ErrorCode::InvalidArgument, "series resolution does not align with stored segment");
      }
      if (out.unit.empty()) out.unit = seg->unit;
      out.samples.push_back(seg->samples[static_cast<std::size_t>((slot - seg->start) / resolution)]);
    } else {
      throw Error(ErrorCode::InvalidArgument, std::string(key) + " is not numeric");
    }
  }
  return out;
}

std::vector<Tick> ContextStore::versions(const ActorId& owner, std::string_view key) const {
  std::vector<Tick> out;
  if (auto* v = find_versions(owner, key)) {
    for (const auto& e : *v) out.push_back(e.timestamp);
  }
  return out;
}

std::size_t ContextStore::record_count() const {
  std::size_t n = 0;
  for (const auto& [owner, keys] : owners_) {
    for (const auto& [key, versions] : keys) n += versions.size();
  }
  return n;
}

void ContextStore::for_each_record(const std::function<void(const RecordInfo&)>& fn) const {
  for (const auto& [owner, keys] : owners_) {
    for (const auto& [key, versions] : keys) {
      for (const auto& e : versions) {
        fn(RecordInfo{owner, key, e.timestamp, e.policy, e.tier, e.downsampled, e.bytes});
      }
    }
  }
}

MaintenanceReport ContextStore::maintain(Tick now) {
  note_op("context.maintain");
  MaintenanceReport report;
  const auto& th = config_.thresholds;

  for (auto& [owner, keys] : owners_) {
    for (auto& [key, versions] : keys) {
      for (auto it = versions.begin(); it != versions.end();) {
        auto& e = *it;
        if (e.policy.infinite()) {
          ++it;
          continue;
        }
        const Tick period = *e.policy.period;
        const Tick age = now - e.timestamp;
        if (e.policy.deletable && age > period) {
          report.actions.push_back({"delete", owner, key, e.timestamp, e.tier, std::nullopt});
          if (e.tier == Tier::Hot) hot_bytes_ -= e.bytes;
          it = versions.erase(it);
          continue;
        }
        if (age > period) {
          note_op("context.classify_temperature");
          const Tier target = classify_intensity(e.policy.intensity.at(now), th);
          if (tier_rank(target) > tier_rank(e.tier)) {
            const Tier from = e.tier;
            move_tier(owner, key, e, target);
            report.actions.push_back({target == Tier::Cold ? "compress" : "demote", owner, key, e.timestamp, from,
                                      target});
          }
        }
        if (e.tier == Tier::Cold && !e.downsampled && age > 2 * period) {
          auto value = load(owner, key, e);
          if (auto* seg = std::get_if<TimeSeriesSegment>(&value)) {
            if (seg->samples.size() < 2) {
              report.skipped.push_back(owner.str() + " " + key + "@" + std::to_string(e.timestamp) +
                                       " segment too short to downsample");
            } else {
              auto reduced = downsample(*seg, config_.downsample_factor);
              auto raw = encode_value(reduced);
              ByteWriter w;
              w.u8(1);
              w.actor(owner);
              w.str(key);
              w.i64(e.timestamp);
              w.str(compress_bytes(raw));
              e.offset = log_->append(w.bytes());
              e.bytes = raw.size();
              e.downsampled = true;
              report.actions.push_back({"downsample", owner, key, e.timestamp, Tier::Cold, Tier::Cold});
            }
          }
        }
        ++it;
      }
    }
  }

  if (hot_bytes_ > config_.hot_cap_bytes) {
    struct Candidate {
      bool infinite;
      double intensity;
      const ActorId* owner;
      const std::string* key;
      Entry* entry;
    };
    std::vector<Candidate> hot;
    for (auto& [owner, keys] : owners_) {
      for (auto& [key, versions] : keys) {
        for (auto& e : versions) {
          if (e.tier == Tier::Hot) hot.push_back({e.policy.infinite(), e.policy.intensity.at(now), &owner, &key, &e});
        }
      }
    }
    // Finite-period records go first; profile data is only demoted if the cap demands it.
    std::sort(hot.begin(), hot.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.infinite, a.intensity, *a.owner, *a.key, a.entry->timestamp) <
             std::tie(b.infinite, b.intensity, *b.owner, *b.key, b.entry->timestamp);
    });
    for (auto& c : hot) {
      if (hot_bytes_ <= config_.hot_cap_bytes) break;
      move_tier(*c.owner, *c.key, *c.entry, Tier::Warm);
      report.actions.push_back({"evict", *c.owner, *c.key, c.entry->timestamp, Tier::Hot, Tier::Warm});
    }
  }
  report.hot_bytes_after = hot_bytes_;
  return report;
}

}  // namespace gova
