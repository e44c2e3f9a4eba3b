#include "gova/actor_runtime.hpp"

#include <algorithm>
#include <tuple>

namespace gova {

double Message::number(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end()) throw Error(ErrorCode::InvalidArgument, type + " lacks field " + key);
  if (auto d = std::get_if<double>(&it->second)) return *d;
  if (auto i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw Error(ErrorCode::InvalidArgument, type + "." + key + " is not numeric");
}

std::int64_t Message::integer(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end()) throw Error(ErrorCode::InvalidArgument, type + " lacks field " + key);
  if (auto i = std::get_if<std::int64_t>(&it->second)) return *i;
  throw Error(ErrorCode::InvalidArgument, type + "." + key + " is not an integer");
}

const std::string& Message::text(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end()) throw Error(ErrorCode::InvalidArgument, type + " lacks field " + key);
  if (auto s = std::get_if<std::string>(&it->second)) return *s;
  throw Error(ErrorCode::InvalidArgument, type + "." + key + " is not text");
}

void EffectSet::add_edge(ActorId src, ActorId dst, std::string type, double weight, Tick at) {
  GraphMutation m;
  m.kind = GraphMutation::Kind::AddEdge;
  m.at = at;
  m.edge = EdgeRecord{std::move(src), std::move(dst), std::move(type), weight, at, kOpen};
  graph_mutations.push_back(std::move(m));
}

void EffectSet::end_edge(ActorId src, ActorId dst, std::string type, Tick at) {
  GraphMutation m;
  m.kind = GraphMutation::Kind::EndEdge;
  m.at = at;
  m.edge = EdgeRecord{std::move(src), std::move(dst), std::move(type), 0.0, 0, at};
  graph_mutations.push_back(std::move(m));
}

BehaviorTable& BehaviorTable::on(std::string message_type, Handler handler) {
  handlers_.insert_or_assign(std::move(message_type), std::move(handler));
  return *this;
}

const Handler* BehaviorTable::find(std::string_view message_type) const {
  auto it = handlers_.find(message_type);
  return it == handlers_.end() ? nullptr : &it->second;
}

SnapshotHandle SnapshotStore::persist(const ActorId& id, const KeyValueMap& state) {
  ByteWriter w;
  w.actor(id);
  w.kv_map(state);
  auto offset = log_.append(w.bytes());
  latest_[id] = offset;
  return SnapshotHandle{id, offset};
}

KeyValueMap SnapshotStore::load(const SnapshotHandle& handle) const {
  ByteReader r(log_.read(handle.offset));
  auto id = r.actor();
  if (id != handle.id) throw Error(ErrorCode::CorruptSnapshot, "snapshot belongs to " + id.str());
  auto state = r.kv_map();
  if (!r.done()) throw Error(ErrorCode::CorruptSnapshot, "trailing bytes in snapshot");
  return state;
}

std::optional<SnapshotHandle> SnapshotStore::latest(const ActorId& id) const {
  auto it = latest_.find(id);
  if (it == latest_.end()) return std::nullopt;
  return SnapshotHandle{id, it->second};
}

std::map<ActorId, KeyValueMap> SnapshotStore::replay() const {
  std::map<ActorId, KeyValueMap> out;
  for (const auto& [offset, payload] : log_.scan()) {
    ByteReader r(payload);
    auto id = r.actor();
    out[id] = r.kv_map();
  }
  return out;
}

bool ActorRuntime::Later::operator()(const std::unique_ptr<Item>& a, const std::unique_ptr<Item>& b) const {
  return std::tie(a->time, a->seq, a->src, a->dst, a->order) > std::tie(b->time, b->seq, b->src, b->dst, b->order);
}

ActorRuntime::ActorRuntime(RuntimeOptions options)
    : options_(std::move(options)),
      snapshot_log_(options_.snapshot_path ? std::make_unique<RecordLog>(*options_.snapshot_path)
                                           : std::make_unique<RecordLog>()),
      snapshots_(*snapshot_log_),
      context_(clock_, options_.context, &context_log_) {}

void ActorRuntime::register_behavior(BehaviorTable table) {
  auto kind = table.kind();
  behaviors_.insert_or_assign(std::move(kind), std::move(table));
}

ActorId ActorRuntime::spawn(std::string kind, std::string local_id, KeyValueMap initial_state, Attributes attrs) {
  note_op("runtime.spawn");
  if (!behaviors_.contains(kind)) throw Error(ErrorCode::UnknownKind, kind);
  ActorId id{std::move(kind), std::move(local_id)};
  if (actors_.contains(id)) throw Error(ErrorCode::DuplicateId, id.str());
  if (!graph_.has_node(id)) graph_.add_node(id, std::move(attrs), clock_.now());
  context_.register_owner(id);
  actors_.emplace(id, ActorRecord{id, std::move(initial_state), ActorStatus::Active, clock_.now()});
  return id;
}

ActorRecord& ActorRuntime::record_of(const ActorId& id) {
  auto it = actors_.find(id);
  if (it == actors_.end()) throw Error(ErrorCode::UnknownActor, id.str());
  return it->second;
}

const ActorRecord& ActorRuntime::actor(const ActorId& id) const {
  auto it = actors_.find(id);
  if (it == actors_.end()) throw Error(ErrorCode::UnknownActor, id.str());
  return it->second;
}

std::vector<ActorId> ActorRuntime::actor_ids() const {
  std::vector<ActorId> out;
  out.reserve(actors_.size());
  for (const auto& [id, rec] : actors_) out.push_back(id);
  return out;
}

int ActorRuntime::silo_of(const ActorId& id) const {
  auto it = silo_of_.find(id);
  return it == silo_of_.end() ? 0 : it->second;
}

std::uint32_t ActorRuntime::trace_index(const ActorId& id) {
  auto [it, inserted] = trace_index_.try_emplace(id, static_cast<std::uint32_t>(trace_.actors.size()));
  if (inserted) trace_.actors.push_back(id);
  return it->second;
}

DeliveryReceipt ActorRuntime::send(const ActorId& src, const ActorId& dst, Message payload) {
  note_op("runtime.send");
  if (!actors_.contains(dst)) throw Error(ErrorCode::UnknownActor, dst.str());
  const bool external = src == kSystemActor;
  if (!external && !actors_.contains(src)) throw Error(ErrorCode::UnknownActor, src.str());

  DeliveryReceipt receipt;
  receipt.seq = ++next_seq_[{src, dst}];
  receipt.send_time = clock_.now();
  if (!external) {
    receipt.cross_silo = silo_of(src) != silo_of(dst);
    receipt.latency = options_.cost.message(receipt.cross_silo);
    TraceEvent ev;
    ev.kind = TraceEvent::Kind::Message;
    ev.src = trace_index(src);
    ev.dst = trace_index(dst);
    ev.time = receipt.send_time;
    trace_.events.push_back(ev);
  }

  auto item = std::make_unique<Item>();
  item->time = receipt.send_time;
  item->seq = receipt.seq;
  item->src = src;
  item->dst = dst;
  item->order = order_++;
  item->envelope = Envelope{src, dst, std::move(payload), receipt.send_time, receipt.seq};
  queue_.push_back(std::move(item));
  std::push_heap(queue_.begin(), queue_.end(), Later{});
  return receipt;
}

void ActorRuntime::schedule(Tick at, std::function<void()> task) {
  if (at < clock_.now()) throw Error(ErrorCode::ClockRegression, "task scheduled in the past");
  auto item = std::make_unique<Item>();
  item->time = at;
  item->seq = 0;  // tasks run before messages queued for the same instant
  item->src = kSystemActor;
  item->order = order_++;
  item->task = std::move(task);
  queue_.push_back(std::move(item));
  std::push_heap(queue_.begin(), queue_.end(), Later{});
}

std::size_t ActorRuntime::run_until(Tick t) {
  std::size_t processed = 0;
  while (!queue_.empty() && queue_.front()->time <= t) {
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    auto item = std::move(queue_.back());
    queue_.pop_back();
    clock_.advance_to(item->time);
    if (item->task) {
      item->task();
    } else {
      deliver(std::move(*item->envelope));
    }
    ++processed;
  }
  if (t > clock_.now()) clock_.advance_to(t);
  return processed;
}

EffectSet ActorRuntime::dispatch(const ActorRecord& actor, const Envelope& envelope) const {
  note_op("runtime.dispatch");
  if (actor.status != ActorStatus::Active) throw Error(ErrorCode::InvalidArgument, actor.id.str() + " is not active");
  auto b = behaviors_.find(actor.id.kind);
  if (b == behaviors_.end()) throw Error(ErrorCode::UnknownKind, actor.id.kind);
  const Handler* handler = b->second.find(envelope.payload.type);
  if (handler == nullptr) {
    throw Error(ErrorCode::UnhandledMessage, actor.id.kind + " has no handler for '" + envelope.payload.type + "'");
  }
  EffectSet effects;
  HandlerContext ctx{actor, envelope, graph_, context_, clock_.now()};
  (*handler)(ctx, effects);
  return effects;
}

void ActorRuntime::deliver(Envelope env) {
  auto& rec = record_of(env.dst);
  try {
    if (rec.status == ActorStatus::Deactivated) activate(rec.id);
    auto effects = dispatch(rec, env);
    apply(rec, env, std::move(effects));
  } catch (const Error& e) {
    failures_.push_back(DispatchFailure{std::move(env), e.code(), e.what()});
    return;
  } catch (const std::exception& e) {
    failures_.push_back(DispatchFailure{std::move(env), ErrorCode::InvalidArgument, e.what()});
    return;
  }
  rec.last_message_time = clock_.now();
  ++delivered_;
  if (delivered_hook_) delivered_hook_(env);
}

void ActorRuntime::apply(ActorRecord& actor, const Envelope& env, EffectSet effects) {
  // Validate everything that can fail before touching any state.
  for (const auto& w : effects.context_writes) check_context_value(w.value);
  graph_.validate(effects.graph_mutations);
  for (const auto& s : effects.sends) {
    if (!actors_.contains(s.dst)) throw Error(ErrorCode::UnknownActor, s.dst.str());
  }

  dispatching_ = &env.dst;
  if (actor.id != *dispatching_) ++ownership_violations_;
  for (auto& [k, v] : effects.state_set) actor.state.insert_or_assign(k, std::move(v));
  for (const auto& k : effects.state_erase) actor.state.erase(k);
  dispatching_ = nullptr;

  for (auto& w : effects.context_writes) {
    context_.put(actor.id, w.key, std::move(w.value), w.timestamp, std::move(w.policy));
  }
  for (const auto& m : effects.graph_mutations) {
    if (m.kind == GraphMutation::Kind::AddEdge) {
      graph_.add_edge(m.edge.src, m.edge.dst, m.edge.type, m.edge.weight, m.edge.valid_from);
    } else if (m.kind == GraphMutation::Kind::EndEdge) {
      graph_.end_edge(m.edge.src, m.edge.dst, m.edge.type, m.edge.valid_to);
    }
  }
  for (auto& s : effects.sends) send(actor.id, s.dst, std::move(s.payload));
  for (auto& p : effects.publications) {
    publish(ChangeEvent{actor.id, std::move(p.key), std::move(p.old_value), std::move(p.new_value), p.timestamp});
  }
}

std::vector<ActorId> ActorRuntime::publish(const ChangeEvent& event) {
  note_op("propagation.publish");
  if (!actors_.contains(event.publisher)) throw Error(ErrorCode::UnknownActor, event.publisher.str());
  auto subscribers = graph_.subscribers_of(event.publisher, event.key);
  for (const auto& sub : subscribers) {
    Message note{"notification",
                 {{"publisher", event.publisher.str()},
                  {"key", event.key},
                  {"old", event.old_value},
                  {"new", event.new_value},
                  {"t", event.timestamp}}};
    send(event.publisher, sub, std::move(note));
  }
  return subscribers;
}

std::vector<ActorId> ActorRuntime::deactivate_idle(Tick idle_threshold) {
  note_op("runtime.deactivate_idle");
  std::vector<ActorId> out;
  const Tick now = clock_.now();
  for (auto& [id, rec] : actors_) {
    if (rec.status != ActorStatus::Active || now - rec.last_message_time < idle_threshold) continue;
    try {
      persist_snapshot(id);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PersistenceFailure) throw;
      continue;
    }
    rec.state.clear();
    rec.status = ActorStatus::Deactivated;
    out.push_back(id);
  }
  return out;
}

const ActorRecord& ActorRuntime::activate(const ActorId& id) {
  note_op("runtime.activate");
  auto& rec = record_of(id);
  if (rec.status == ActorStatus::Active) return rec;
  auto handle = snapshots_.latest(id);
  if (!handle) throw Error(ErrorCode::CorruptSnapshot, "no snapshot for deactivated " + id.str());
  rec.state = snapshots_.load(*handle);
  rec.status = ActorStatus::Active;
  return rec;
}

SnapshotHandle ActorRuntime::persist_snapshot(const ActorId& id) {
  note_op("runtime.persist_snapshot");
  auto& rec = record_of(id);
  if (rec.status == ActorStatus::Deactivated) {
    // The in-memory state was released; the latest snapshot is authoritative.
    if (auto latest = snapshots_.latest(id)) return *latest;
  }
  auto handle = snapshots_.persist(id, rec.state);
  TraceEvent ev;
  ev.kind = TraceEvent::Kind::Snapshot;
  ev.src = ev.dst = trace_index(id);
  ev.time = clock_.now();
  ev.bytes = snapshot_log_->read(handle.offset).size();
  trace_.events.push_back(ev);
  return handle;
}

}  // namespace gova
