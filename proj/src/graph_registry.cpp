#include "gova/graph_registry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace gova {

double haversine_km(GeoPoint a, GeoPoint b) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kRad;
  const double dlon = (b.lon - a.lon) * kRad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

std::optional<double> numeric_attr(const Attributes& attrs, std::string_view key) {
  auto it = attrs.find(std::string(key));
  if (it == attrs.end()) return std::nullopt;
  if (auto d = std::get_if<double>(&it->second)) return *d;
  if (auto i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  return std::nullopt;
}

std::optional<GeoPoint> geo_of(const Attributes& attrs) {
  auto lat = numeric_attr(attrs, "lat");
  auto lon = numeric_attr(attrs, "lon");
  if (!lat || !lon) return std::nullopt;
  return GeoPoint{*lat, *lon};
}

bool key_matches(std::string_view pattern, std::string_view key) {
  if (pattern == "*") return true;
  if (!pattern.empty() && pattern.back() == '*') {
    auto prefix = pattern.substr(0, pattern.size() - 1);
    return key.substr(0, prefix.size()) == prefix;
  }
  return pattern == key;
}

std::string GraphMutation::encode() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  w.i64(at);
  if (kind == Kind::AddNode) {
    w.actor(node.id);
    w.kv_map(node.attrs);
    w.i64(node.since);
  } else {
    w.actor(edge.src);
    w.actor(edge.dst);
    w.str(edge.type);
    w.f64(edge.weight);
    w.i64(edge.valid_from);
    w.i64(edge.valid_to);
  }
  return std::move(w).bytes();
}

GraphMutation GraphMutation::decode(std::string_view payload) {
  ByteReader r(payload);
  GraphMutation m;
  auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(Kind::EndEdge)) throw Error(ErrorCode::CorruptSnapshot, "bad mutation kind");
  m.kind = static_cast<Kind>(kind);
  m.at = r.i64();
  if (m.kind == Kind::AddNode) {
    m.node.id = r.actor();
    m.node.attrs = r.kv_map();
    m.node.since = r.i64();
  } else {
    m.edge.src = r.actor();
    m.edge.dst = r.actor();
    m.edge.type = r.str();
    m.edge.weight = r.f64();
    m.edge.valid_from = r.i64();
    m.edge.valid_to = r.i64();
  }
  return m;
}

GraphView::GraphView(Tick at, std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges)
    : at_(at), nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::sort(nodes_.begin(), nodes_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(edges_.begin(), edges_.end());
}

bool GraphView::contains(const ActorId& id) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                             [](const NodeRecord& n, const ActorId& key) { return n.id < key; });
  return it != nodes_.end() && it->id == id;
}

std::vector<EdgeRecord> GraphView::edges_of(const std::set<std::string>& types) const {
  if (types.empty()) return edges_;
  std::vector<EdgeRecord> out;
  for (const auto& e : edges_) {
    if (types.contains(e.type)) out.push_back(e);
  }
  return out;
}

EdgeFilter edge_type_is(std::string type) {
  return [type = std::move(type)](const EdgeRecord& e) { return e.type == type; };
}

GraphRegistry::NodeIndex GraphRegistry::index_of(const ActorId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownActor, id.str());
  return it->second;
}

void GraphRegistry::record(GraphMutation m) {
  if (sink_ != nullptr) sink_->append(m.encode());
  log_.push_back(std::move(m));
}

void GraphRegistry::add_node(const ActorId& id, Attributes attrs, Tick since) {
  if (index_.contains(id)) throw Error(ErrorCode::DuplicateId, id.str());
  index_.emplace(id, nodes_.size());
  nodes_.push_back(NodeRecord{id, std::move(attrs), since});
  out_.emplace_back();
  in_.emplace_back();
  GraphMutation m;
  m.kind = GraphMutation::Kind::AddNode;
  m.at = since;
  m.node = nodes_.back();
  record(std::move(m));
}

const NodeRecord& GraphRegistry::node(const ActorId& id) const { return nodes_[index_of(id)]; }

std::vector<ActorId> GraphRegistry::nodes_of_kind(std::string_view kind) const {
  std::vector<ActorId> out;
  for (const auto& [id, idx] : index_) {
    if (id.kind == kind) out.push_back(id);
  }
  return out;
}

const EdgeRecord& GraphRegistry::add_edge(const ActorId& src, const ActorId& dst, std::string_view type,
                                          double weight, Tick valid_from) {
  note_op("graph.add_edge");
  const auto s = index_of(src);
  const auto d = index_of(dst);
  if (weight < 0.0 || std::isnan(weight)) throw Error(ErrorCode::InvalidArgument, "negative edge weight");
  TripleKey key{s, d, std::string(type)};
  if (open_.contains(key)) {
    throw Error(ErrorCode::OverlappingValidity, src.str() + " -" + std::string(type) + "-> " + dst.str());
  }
  if (auto it = last_end_.find(key); it != last_end_.end() && valid_from < it->second) {
    throw Error(ErrorCode::OverlappingValidity, "interval starts before previous one ends");
  }
  const auto idx = edges_.size();
  edges_.push_back(EdgeRecord{src, dst, std::string(type), weight, valid_from, kOpen});
  out_[s].push_back(idx);
  in_[d].push_back(idx);
  open_.emplace(std::move(key), idx);
  GraphMutation m;
  m.kind = GraphMutation::Kind::AddEdge;
  m.at = valid_from;
  m.edge = edges_[idx];
  record(std::move(m));
  return edges_[idx];
}

const EdgeRecord& GraphRegistry::end_edge(const ActorId& src, const ActorId& dst, std::string_view type,
                                          Tick valid_to) {
  note_op("graph.end_edge");
  TripleKey key{index_of(src), index_of(dst), std::string(type)};
  auto it = open_.find(key);
  if (it == open_.end()) {
    throw Error(ErrorCode::NoOpenEdge, src.str() + " -" + std::string(type) + "-> " + dst.str());
  }
  auto& e = edges_[it->second];
  if (valid_to <= e.valid_from) throw Error(ErrorCode::InvalidInterval, "valid_to must exceed valid_from");
  e.valid_to = valid_to;
  last_end_[key] = valid_to;
  open_.erase(it);
  GraphMutation m;
  m.kind = GraphMutation::Kind::EndEdge;
  m.at = valid_to;
  m.edge = e;
  record(std::move(m));
  return e;
}

std::optional<EdgeRecord> GraphRegistry::open_edge(const ActorId& src, const ActorId& dst,
                                                   std::string_view type) const {
  auto s = index_.find(src);
  auto d = index_.find(dst);
  if (s == index_.end() || d == index_.end()) return std::nullopt;
  auto it = open_.find(TripleKey{s->second, d->second, std::string(type)});
  if (it == open_.end()) return std::nullopt;
  return edges_[it->second];
}

std::vector<ActorId> GraphRegistry::neighbors(const ActorId& node, std::string_view type, Tick at) const {
  note_op("graph.neighbors");
  std::vector<ActorId> out;
  for (auto idx : out_[index_of(node)]) {
    const auto& e = edges_[idx];
    if (e.type == type && e.valid_at(at)) out.push_back(e.dst);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ActorId> GraphRegistry::parents(const ActorId& node, std::string_view type, Tick at) const {
  std::vector<ActorId> out;
  for (auto idx : in_[index_of(node)]) {
    const auto& e = edges_[idx];
    if (e.type == type && e.valid_at(at)) out.push_back(e.src);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::set<ActorId> GraphRegistry::traverse(const ActorId& origin, const EdgeFilter& filter, Tick at) const {
  note_op("graph.traverse");
  const auto start = index_of(origin);
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<NodeIndex> frontier{start};
  seen[start] = true;
  std::set<ActorId> out{origin};
  while (!frontier.empty()) {
    auto cur = frontier.front();
    frontier.pop_front();
    for (auto idx : out_[cur]) {
      const auto& e = edges_[idx];
      if (!e.valid_at(at) || (filter && !filter(e))) continue;
      auto next = index_.at(e.dst);
      if (seen[next]) continue;
      seen[next] = true;
      out.insert(e.dst);
      frontier.push_back(next);
    }
  }
  return out;
}

std::optional<ActorId> GraphRegistry::find_service(const ActorId& origin, std::string_view kind,
                                                   const AttrPredicate& pred, Tick at) const {
  note_op("graph.find_service");
  const auto origin_geo = geo_of(node(origin).attrs);
  std::optional<ActorId> best;
  double best_km = 0.0;
  // index_ iterates in id order, so strict '<' keeps the smallest id on ties.
  for (const auto& [id, idx] : index_) {
    const auto& n = nodes_[idx];
    if (id.kind != kind || n.since > at || id == origin) continue;
    if (pred && !pred(n.attrs)) continue;
    double km = 0.0;
    if (origin_geo) {
      auto g = geo_of(n.attrs);
      if (!g) continue;
      km = haversine_km(*origin_geo, *g);
    }
    if (!best || km < best_km) {
      best = id;
      best_km = km;
    }
  }
  return best;
}

const Subscription& GraphRegistry::subscribe(const ActorId& subscriber, const ActorId& publisher,
                                             std::string_view key) {
  note_op("graph.subscribe");
  index_of(subscriber);
  index_of(publisher);
  auto [it, inserted] = subscriptions_.insert(Subscription{subscriber, publisher, std::string(key)});
  return *it;
}

bool GraphRegistry::unsubscribe(const ActorId& subscriber, const ActorId& publisher, std::string_view key) {
  return subscriptions_.erase(Subscription{subscriber, publisher, std::string(key)}) > 0;
}

std::vector<ActorId> GraphRegistry::subscribers_of(const ActorId& publisher, std::string_view key) const {
  note_op("graph.subscribers_of");
  index_of(publisher);
  std::vector<ActorId> out;
  for (const auto& s : subscriptions_) {
    if (s.publisher == publisher && key_matches(s.key, key)) out.push_back(s.subscriber);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

GraphView GraphRegistry::snapshot_at(Tick t) const {
  note_op("graph.snapshot_at");
  std::vector<NodeRecord> nodes;
  for (const auto& n : nodes_) {
    if (n.since <= t) nodes.push_back(n);
  }
  std::vector<EdgeRecord> edges;
  for (const auto& e : edges_) {
    if (e.valid_at(t)) edges.push_back(e);
  }
  return GraphView(t, std::move(nodes), std::move(edges));
}

void GraphRegistry::persist_to(RecordLog* log) {
  sink_ = log;
  if (sink_ == nullptr) return;
  for (const auto& m : log_) sink_->append(m.encode());
}

GraphRegistry GraphRegistry::replay(const std::vector<GraphMutation>& log, Tick up_to) {
  GraphRegistry g;
  for (const auto& m : log) {
    if (m.at > up_to) continue;
    switch (m.kind) {
      case GraphMutation::Kind::AddNode:
        g.add_node(m.node.id, m.node.attrs, m.node.since);
        break;
      case GraphMutation::Kind::AddEdge:
        g.add_edge(m.edge.src, m.edge.dst, m.edge.type, m.edge.weight, m.edge.valid_from);
        break;
      case GraphMutation::Kind::EndEdge:
        g.end_edge(m.edge.src, m.edge.dst, m.edge.type, m.edge.valid_to);
        break;
    }
  }
  return g;
}

GraphRegistry GraphRegistry::recover(const RecordLog& log) {
  std::vector<GraphMutation> mutations;
  for (const auto& [off, payload] : log.scan()) mutations.push_back(GraphMutation::decode(payload));
  return replay(mutations);
}

void GraphRegistry::validate(const std::vector<GraphMutation>& pending) const {
  // Track only the triples the batch touches.
  std::map<TripleKey, std::pair<bool, Tick>> state;  // open?, open-from or last end
  auto lookup = [&](const EdgeRecord& e) -> std::pair<TripleKey, std::pair<bool, Tick>> {
    TripleKey key{index_of(e.src), index_of(e.dst), e.type};
    if (auto it = state.find(key); it != state.end()) return {key, it->second};
    if (auto it = open_.find(key); it != open_.end()) return {key, {true, edges_[it->second].valid_from}};
    if (auto it = last_end_.find(key); it != last_end_.end()) return {key, {false, it->second}};
    return {key, {false, std::numeric_limits<Tick>::min()}};
  };
  for (const auto& m : pending) {
    if (m.kind == GraphMutation::Kind::AddNode) continue;
    auto [key, st] = lookup(m.edge);
    if (m.kind == GraphMutation::Kind::AddEdge) {
      if (st.first || m.edge.valid_from < st.second) {
        throw Error(ErrorCode::OverlappingValidity, m.edge.src.str() + " -> " + m.edge.dst.str());
      }
      state[key] = {true, m.edge.valid_from};
    } else {
      if (!st.first) throw Error(ErrorCode::NoOpenEdge, m.edge.src.str() + " -> " + m.edge.dst.str());
      if (m.edge.valid_to <= st.second) throw Error(ErrorCode::InvalidInterval, "valid_to must exceed valid_from");
      state[key] = {false, m.edge.valid_to};
    }
  }
}

namespace {

Value parse_attr_value(std::string_view text) {
  if (text == "true") return Value{true};
  if (text == "false") return Value{false};
  std::int64_t i = 0;
  auto [iend, iec] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (iec == std::errc{} && iend == text.data() + text.size()) return Value{i};
  double d = 0;
  auto [dend, dec] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (dec == std::errc{} && dend == text.data() + text.size()) return Value{d};
  return Value{std::string(text)};
}

std::string attr_text(const Value& v) {
  // Doubles that print like integers keep a decimal point so they reparse as doubles.
  if (auto d = std::get_if<double>(&v)) {
    auto s = format_double(*d);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  return value_to_string(v);
}

}  // namespace

void load_graph(GraphRegistry& graph, std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string head;
    if (!(ss >> head) || head[0] == '#') continue;
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + why);
    };
    if (head == "node") {
      std::string kind, id, tok;
      if (!(ss >> kind >> id)) fail("node needs <kind> <id>");
      Attributes attrs;
      while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) fail("bad attribute '" + tok + "'");
        attrs[tok.substr(0, eq)] = parse_attr_value(std::string_view(tok).substr(eq + 1));
      }
      graph.add_node(ActorId{kind, id}, std::move(attrs));
    } else if (head == "edge") {
      std::string type, src, dst;
      double weight = 0;
      Tick from = 0;
      if (!(ss >> type >> src >> dst >> weight >> from)) fail("edge needs <type> <src> <dst> <weight> <valid_from>");
      graph.add_edge(ActorId::parse(src), ActorId::parse(dst), type, weight, from);
    } else {
      fail("unknown record '" + head + "'");
    }
  }
}

void write_graph(const GraphRegistry& graph, std::ostream& out) {
  std::vector<const NodeRecord*> nodes;
  for (const auto& m : graph.mutation_log()) {
    if (m.kind == GraphMutation::Kind::AddNode) nodes.push_back(&graph.node(m.node.id));
  }
  for (const auto* n : nodes) {
    out << "node " << n->id.kind << ' ' << n->id.local_id;
    for (const auto& [k, v] : n->attrs) out << ' ' << k << '=' << attr_text(v);
    out << '\n';
  }
  // Closed intervals have no representation in the ingestion format.
  for (const auto& e : graph.edges()) {
    if (!e.is_open()) continue;
    out << "edge " << e.type << ' ' << e.src.str() << ' ' << e.dst.str() << ' ' << format_double(e.weight) << ' '
        << e.valid_from << '\n';
  }
}

}  // namespace gova
