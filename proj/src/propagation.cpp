#include "gova/propagation.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace gova {

std::size_t ActionLog::count(std::string_view action) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.action == action; }));
}

void ActionLog::write(std::ostream& out) const {
  for (const auto& e : entries_) {
    out << e.t << '\t' << e.actor.str() << '\t' << e.action << '\t';
    if (e.params.empty()) {
      out << '-';
    } else {
      bool first = true;
      for (const auto& [k, v] : e.params) {
        if (!first) out << ';';
        out << k << '=' << v;
        first = false;
      }
    }
    out << '\n';
  }
}

ActionLog ActionLog::read(std::istream& in) {
  ActionLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 4) throw Error(ErrorCode::ParseError, "action log line needs 4 columns: " + line);
    ActionLogEntry e;
    try {
      e.t = std::stoll(cols[0]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad timestamp: " + cols[0]);
    }
    e.actor = ActorId::parse(cols[1]);
    e.action = cols[2];
    if (cols[3] != "-") {
      std::stringstream ps(cols[3]);
      std::string kv;
      while (std::getline(ps, kv, ';')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "bad param: " + kv);
        e.params.emplace(kv.substr(0, eq), kv.substr(eq + 1));
      }
    }
    log.append(std::move(e));
  }
  return log;
}

std::string_view to_string(SwitchState s) { return s == SwitchState::Open ? "open" : "closed"; }

SwitchState parse_switch_state(std::string_view text) {
  if (text == "open") return SwitchState::Open;
  if (text == "closed") return SwitchState::Closed;
  throw Error(ErrorCode::InvalidArgument, "switch state must be open or closed: " + std::string(text));
}

namespace {

const EdgeFilter& feeds_filter() {
  static const EdgeFilter f = edge_type_is(std::string(rel::kFeeds));
  return f;
}

ActorId attr_actor(const NodeRecord& node, const std::string& key) {
  auto it = node.attrs.find(key);
  if (it == node.attrs.end() || !std::holds_alternative<std::string>(it->second)) {
    throw Error(ErrorCode::InvalidArgument, node.id.str() + " lacks attribute " + key);
  }
  return ActorId::parse(std::get<std::string>(it->second));
}

}  // namespace

TimeSeriesSegment compute_reaggregation(const GraphRegistry& graph, const ContextStore& context,
                                        const ActorId& substation, Tick t_start, Tick t_end) {
  if (t_end < t_start) throw Error(ErrorCode::InvalidArgument, "window end before start");
  TimeSeriesSegment out;
  out.start = t_start;
  out.resolution = kHour;
  out.unit = "kWh";
  for (Tick h = t_start; h < t_end; h += kHour) {
    double sum = 0.0;
    for (const auto& id : graph.traverse(substation, feeds_filter(), h)) {
      if (id.kind != "meter") continue;
      auto rec = context.peek(id, kConsumptionKey, h);
      const Scalar* s = rec ? std::get_if<Scalar>(&rec->value) : nullptr;
      if (s == nullptr || rec->timestamp != h) {
        throw Error(ErrorCode::InsufficientRetention, id.str() + " has no hourly consumption at " + std::to_string(h));
      }
      sum += s->value;
    }
    out.samples.push_back(sum);
  }
  return out;
}

AffectedSet affected_between(const GraphRegistry& graph, Tick before, Tick after) {
  AffectedSet out;
  for (const auto& sub : graph.nodes_of_kind("substation")) {
    auto a = graph.traverse(sub, feeds_filter(), before);
    auto b = graph.traverse(sub, feeds_filter(), after);
    std::vector<ActorId> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
    bool touched = false;
    for (const auto& id : diff) {
      if (id.kind == "meter") {
        out.meters.insert(id);
        touched = true;
      }
    }
    if (touched) out.substations.insert(sub);
  }
  return out;
}

void apply_switch_action(GraphRegistry& graph, const ActionLogEntry& entry) {
  if (entry.action != action::kSwitchToggle) return;
  const auto from = ActorId::parse(entry.params.at("from"));
  const auto to = ActorId::parse(entry.params.at("to"));
  graph.end_edge(from, entry.actor, rel::kFeeds, entry.t);
  graph.add_edge(to, entry.actor, rel::kFeeds, 1.0, entry.t);
}

SwitchState Propagator::switch_state(const ActorId& sw, Tick at) const {
  const auto& node = runtime_.graph().node(sw);
  const auto alt = attr_actor(node, "alt_parent");
  auto parents = runtime_.graph().parents(sw, rel::kFeeds, at);
  return std::find(parents.begin(), parents.end(), alt) != parents.end() ? SwitchState::Closed : SwitchState::Open;
}

AffectedSet Propagator::propagate_topology_change(const ActorId& sw, SwitchState new_state, Tick t) {
  note_op("propagation.propagate_topology_change");
  if (!runtime_.exists(sw)) throw Error(ErrorCode::UnknownActor, sw.str());
  auto& graph = runtime_.graph();
  const auto& node = graph.node(sw);
  const auto normal = attr_actor(node, "normal_parent");
  const auto alt = attr_actor(node, "alt_parent");
  const auto old_state = switch_state(sw, t);
  if (old_state == new_state) throw Error(ErrorCode::NoStateChange, sw.str() + " already " + std::string(to_string(new_state)));

  const auto& from = new_state == SwitchState::Closed ? normal : alt;
  const auto& to = new_state == SwitchState::Closed ? alt : normal;
  ActionLogEntry entry{t, sw, std::string(action::kSwitchToggle),
                       {{"state", std::string(to_string(new_state))}, {"from", from.str()}, {"to", to.str()}}};
  apply_switch_action(graph, entry);
  log_.append(entry);

  ChangeEvent event{sw, "switch_state", std::string(to_string(old_state)), std::string(to_string(new_state)), t};
  runtime_.send(kSystemActor, sw, Message{"set_state", {{"state", std::string(to_string(new_state))}}});
  publish(event);

  auto affected = affected_between(graph, t - 1, t);
  for (const auto& sub : affected.substations) {
    pending_.push_back(ReaggregationJob{sub, history_start_, t, event});
  }
  return affected;
}

std::vector<AffectedSet> Propagator::propagate_topology_changes(std::vector<SwitchToggle> toggles) {
  std::stable_sort(toggles.begin(), toggles.end(),
                   [](const auto& a, const auto& b) { return std::tie(a.t, a.sw) < std::tie(b.t, b.sw); });
  std::vector<AffectedSet> out;
  for (const auto& tg : toggles) out.push_back(propagate_topology_change(tg.sw, tg.state, tg.t));
  return out;
}

TimeSeriesSegment Propagator::reaggregate(const ActorId& substation, Tick t_start, Tick t_end) {
  note_op("propagation.reaggregate");
  if (!runtime_.exists(substation)) throw Error(ErrorCode::UnknownActor, substation.str());
  auto seg = compute_reaggregation(runtime_.graph(), runtime_.context(), substation, t_start, t_end);
  runtime_.send(kSystemActor, substation, Message{"reaggregate", {{"t_start", t_start}, {"t_end", t_end}}});
  runtime_.drain();
  return seg;
}

std::size_t Propagator::run_jobs() {
  auto jobs = std::move(pending_);
  pending_.clear();
  for (auto& job : jobs) {
    reaggregate(job.substation, job.t_start, job.t_end);
    completed_.push_back(std::move(job));
  }
  return jobs.size();
}

}  // namespace gova
