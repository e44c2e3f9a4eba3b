#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gova/clock.hpp"
#include "gova/context_store.hpp"
#include "gova/cost_model.hpp"
#include "gova/graph_registry.hpp"
#include "gova/record_log.hpp"
#include "gova/types.hpp"

namespace gova {

struct Message {
  std::string type;
  KeyValueMap fields;

  [[nodiscard]] double number(const std::string& key) const;
  [[nodiscard]] std::int64_t integer(const std::string& key) const;
  [[nodiscard]] const std::string& text(const std::string& key) const;
  [[nodiscard]] bool has(const std::string& key) const { return fields.contains(key); }
};

struct Envelope {
  ActorId src;
  ActorId dst;
  Message payload;
  Tick send_time = 0;
  std::uint64_t seq = 0;  // strictly increasing per (src, dst)
};

// A context value change announced to subscribers.
struct ChangeEvent {
  ActorId publisher;
  std::string key;
  Value old_value;
  Value new_value;
  Tick timestamp = 0;
};

struct ContextWrite {
  std::string key;
  ContextValue value;
  Tick timestamp = 0;
  RelevancePolicy policy;
};

struct OutgoingMessage {
  ActorId dst;
  Message payload;
};

struct Publication {
  std::string key;
  Value old_value;
  Value new_value;
  Tick timestamp = 0;
};

// Everything a handler wants to happen. Applied atomically after the handler
// returns; a throwing handler's effects are discarded.
struct EffectSet {
  KeyValueMap state_set;
  std::vector<std::string> state_erase;
  std::vector<OutgoingMessage> sends;
  std::vector<ContextWrite> context_writes;
  std::vector<GraphMutation> graph_mutations;  // AddEdge / EndEdge
  std::vector<Publication> publications;

  void set(std::string key, Value v) { state_set.insert_or_assign(std::move(key), std::move(v)); }
  void send(ActorId dst, Message payload) { sends.push_back({std::move(dst), std::move(payload)}); }
  void write(std::string key, ContextValue value, Tick timestamp, RelevancePolicy policy) {
    context_writes.push_back({std::move(key), std::move(value), timestamp, std::move(policy)});
  }
  void add_edge(ActorId src, ActorId dst, std::string type, double weight, Tick at);
  void end_edge(ActorId src, ActorId dst, std::string type, Tick at);
  void publish(std::string key, Value old_value, Value new_value, Tick timestamp) {
    publications.push_back({std::move(key), std::move(old_value), std::move(new_value), timestamp});
  }

  [[nodiscard]] bool empty() const {
    return state_set.empty() && state_erase.empty() && sends.empty() && context_writes.empty() &&
           graph_mutations.empty() && publications.empty();
  }
};

enum class ActorStatus : std::uint8_t { Active, Deactivated };

struct ActorRecord {
  ActorId id;
  KeyValueMap state;
  ActorStatus status = ActorStatus::Active;
  Tick last_message_time = 0;
};

// Read-only world a handler sees.
struct HandlerContext {
  const ActorRecord& self;
  const Envelope& envelope;
  const GraphRegistry& graph;
  const ContextStore& context;
  Tick now;
};

using Handler = std::function<void(const HandlerContext&, EffectSet&)>;

class BehaviorTable {
 public:
  explicit BehaviorTable(std::string kind) : kind_(std::move(kind)) {}

  BehaviorTable& on(std::string message_type, Handler handler);

  [[nodiscard]] const std::string& kind() const { return kind_; }
  [[nodiscard]] const Handler* find(std::string_view message_type) const;

 private:
  std::string kind_;
  std::map<std::string, Handler, std::less<>> handlers_;
};

struct DeliveryReceipt {
  std::uint64_t seq = 0;
  Tick send_time = 0;
  Tick latency = 0;  // simulated, from the cost model
  bool cross_silo = false;
};

struct SnapshotHandle {
  ActorId id;
  std::uint64_t offset = 0;
};

// Checksummed actor snapshots in an append-only record log; latest wins.
class SnapshotStore {
 public:
  explicit SnapshotStore(RecordLog& log) : log_(log) {}

  SnapshotHandle persist(const ActorId& id, const KeyValueMap& state);
  [[nodiscard]] KeyValueMap load(const SnapshotHandle& handle) const;
  [[nodiscard]] std::optional<SnapshotHandle> latest(const ActorId& id) const;

  // Rebuilds the latest state of every actor by reading the log in order.
  [[nodiscard]] std::map<ActorId, KeyValueMap> replay() const;

  [[nodiscard]] RecordLog& log() { return log_; }

 private:
  RecordLog& log_;
  std::map<ActorId, std::uint64_t> latest_;
};

// Messages and snapshots seen by the runtime, for latency accounting.
struct TraceEvent {
  enum class Kind : std::uint8_t { Message, Snapshot };
  Kind kind = Kind::Message;
  std::uint32_t src = 0;  // index into MessageTrace::actors
  std::uint32_t dst = 0;
  Tick time = 0;
  std::uint64_t bytes = 0;
};

struct MessageTrace {
  std::vector<ActorId> actors;
  std::vector<TraceEvent> events;
};

struct DispatchFailure {
  Envelope envelope;
  ErrorCode code;
  std::string what;
};

struct RuntimeOptions {
  ContextStoreConfig context;
  CostModel cost;
  std::optional<std::filesystem::path> snapshot_path;  // in-memory when unset
};

// Hosts virtual actors on a deterministic single-threaded event loop.
// Queue order is (time, seq, src, dst); delivery is exactly-once and FIFO
// per (src, dst).
class ActorRuntime {
 public:
  explicit ActorRuntime(RuntimeOptions options = {});

  ActorRuntime(const ActorRuntime&) = delete;
  ActorRuntime& operator=(const ActorRuntime&) = delete;

  void register_behavior(BehaviorTable table);
  [[nodiscard]] bool has_behavior(std::string_view kind) const { return behaviors_.contains(kind); }

  ActorId spawn(std::string kind, std::string local_id, KeyValueMap initial_state = {}, Attributes attrs = {});

  // Enqueues at the current virtual time. Messages from kSystemActor model
  // external input and are not charged or traced.
  DeliveryReceipt send(const ActorId& src, const ActorId& dst, Message payload);

  // Runs `task` from the event loop at virtual time `at`.
  void schedule(Tick at, std::function<void()> task);

  // Processes queued work with time <= t, then advances the clock to t.
  std::size_t run_until(Tick t);
  // Processes everything queued at or before the current time.
  std::size_t drain() { return run_until(clock_.now()); }

  // Invokes the handler for the envelope and returns its effects without
  // applying them. Throws UnhandledMessage when the kind has no handler.
  EffectSet dispatch(const ActorRecord& actor, const Envelope& envelope) const;

  std::vector<ActorId> deactivate_idle(Tick idle_threshold);
  const ActorRecord& activate(const ActorId& id);
  SnapshotHandle persist_snapshot(const ActorId& id);

  // Sends a "notification" message from the publisher to every subscriber of
  // (publisher, key); returns the notified actors in id order.
  std::vector<ActorId> publish(const ChangeEvent& event);

  void set_silos(std::map<ActorId, int> silo_of) { silo_of_ = std::move(silo_of); }
  [[nodiscard]] int silo_of(const ActorId& id) const;

  [[nodiscard]] const ActorRecord& actor(const ActorId& id) const;
  [[nodiscard]] bool exists(const ActorId& id) const { return actors_.contains(id); }
  [[nodiscard]] std::vector<ActorId> actor_ids() const;
  [[nodiscard]] std::size_t actor_count() const { return actors_.size(); }

  [[nodiscard]] VirtualClock& clock() { return clock_; }
  [[nodiscard]] const VirtualClock& clock() const { return clock_; }
  [[nodiscard]] GraphRegistry& graph() { return graph_; }
  [[nodiscard]] const GraphRegistry& graph() const { return graph_; }
  [[nodiscard]] ContextStore& context() { return context_; }
  [[nodiscard]] const ContextStore& context() const { return context_; }
  [[nodiscard]] SnapshotStore& snapshots() { return snapshots_; }
  [[nodiscard]] const CostModel& cost_model() const { return options_.cost; }

  [[nodiscard]] const MessageTrace& trace() const { return trace_; }
  [[nodiscard]] const std::vector<DispatchFailure>& failures() const { return failures_; }
  [[nodiscard]] std::uint64_t delivered_count() const { return delivered_; }
  [[nodiscard]] std::size_t pending() const { return queue_.size(); }
  // Number of state writes applied to an actor other than the dispatching one.
  [[nodiscard]] std::uint64_t ownership_violations() const { return ownership_violations_; }

  // Observer for every successfully applied dispatch.
  void on_delivered(std::function<void(const Envelope&)> fn) { delivered_hook_ = std::move(fn); }

 private:
  struct Item {
    Tick time = 0;
    std::uint64_t seq = 0;
    ActorId src;
    ActorId dst;
    std::uint64_t order = 0;  // insertion counter, final tie-break
    std::optional<Envelope> envelope;
    std::function<void()> task;
  };
  struct Later {
    bool operator()(const std::unique_ptr<Item>& a, const std::unique_ptr<Item>& b) const;
  };

  ActorRecord& record_of(const ActorId& id);
  void deliver(Envelope env);
  void apply(ActorRecord& actor, const Envelope& env, EffectSet effects);
  std::uint32_t trace_index(const ActorId& id);

  RuntimeOptions options_;
  VirtualClock clock_;
  GraphRegistry graph_;
  std::unique_ptr<RecordLog> snapshot_log_;
  SnapshotStore snapshots_;
  RecordLog context_log_;
  ContextStore context_;
  std::map<std::string, BehaviorTable, std::less<>> behaviors_;
  std::map<ActorId, ActorRecord> actors_;
  std::map<std::pair<ActorId, ActorId>, std::uint64_t> next_seq_;
  std::vector<std::unique_ptr<Item>> queue_;  // heap ordered by Later
  std::uint64_t order_ = 0;
  std::map<ActorId, int> silo_of_;
  MessageTrace trace_;
  std::map<ActorId, std::uint32_t> trace_index_;
  std::vector<DispatchFailure> failures_;
  std::uint64_t delivered_ = 0;
  std::uint64_t ownership_violations_ = 0;
  const ActorId* dispatching_ = nullptr;
  std::function<void(const Envelope&)> delivered_hook_;
};

}  // namespace gova
