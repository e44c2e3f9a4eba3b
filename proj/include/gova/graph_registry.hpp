#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gova/record_log.hpp"
#include "gova/types.hpp"

namespace gova {

// Relationship tags used by the grid model. The registry accepts any tag.
namespace rel {
inline constexpr std::string_view kFeeds = "feeds";
inline constexpr std::string_view kConnectedTo = "connected_to";
inline constexpr std::string_view kNearby = "nearby";
inline constexpr std::string_view kMeasures = "measures";
inline constexpr std::string_view kInApplication = "in_application";
}  // namespace rel

using Attributes = KeyValueMap;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Great-circle distance in kilometres on a spherical earth.
double haversine_km(GeoPoint a, GeoPoint b);

// Reads "lat"/"lon" attributes when both are present and numeric.
std::optional<GeoPoint> geo_of(const Attributes& attrs);

// Numeric attribute lookup; integers are widened.
std::optional<double> numeric_attr(const Attributes& attrs, std::string_view key);

struct NodeRecord {
  ActorId id;
  Attributes attrs;
  Tick since = 0;  // node exists in views at t >= since

  [[nodiscard]] const std::string& kind() const { return id.kind; }
};

// Temporal edge with half-open validity [valid_from, valid_to).
struct EdgeRecord {
  ActorId src;
  ActorId dst;
  std::string type;
  double weight = 1.0;
  Tick valid_from = 0;
  Tick valid_to = kOpen;

  [[nodiscard]] bool is_open() const { return valid_to == kOpen; }
  [[nodiscard]] bool valid_at(Tick t) const { return valid_from <= t && t < valid_to; }

  auto operator<=>(const EdgeRecord&) const = default;
  bool operator==(const EdgeRecord&) const = default;
};

struct Subscription {
  ActorId subscriber;
  ActorId publisher;
  std::string key;  // exact key, "*", or "prefix*"

  auto operator<=>(const Subscription&) const = default;
};

bool key_matches(std::string_view pattern, std::string_view key);

struct GraphMutation {
  enum class Kind : std::uint8_t { AddNode, AddEdge, EndEdge };
  Kind kind = Kind::AddNode;
  Tick at = 0;
  NodeRecord node;  // AddNode
  EdgeRecord edge;  // AddEdge / EndEdge (edge.valid_to carries the end time)

  [[nodiscard]] std::string encode() const;
  static GraphMutation decode(std::string_view payload);
};

// Frozen nodes and edges valid at one instant.
class GraphView {
 public:
  GraphView() = default;
  GraphView(Tick at, std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges);

  [[nodiscard]] Tick at() const { return at_; }
  [[nodiscard]] const std::vector<NodeRecord>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<EdgeRecord>& edges() const { return edges_; }
  [[nodiscard]] bool contains(const ActorId& id) const;
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

  // Empty filter selects every relationship tag.
  [[nodiscard]] std::vector<EdgeRecord> edges_of(const std::set<std::string>& types) const;

 private:
  Tick at_ = 0;
  std::vector<NodeRecord> nodes_;  // sorted by id
  std::vector<EdgeRecord> edges_;  // sorted
};

using EdgeFilter = std::function<bool(const EdgeRecord&)>;
using AttrPredicate = std::function<bool(const Attributes&)>;

EdgeFilter edge_type_is(std::string type);

// In-memory temporal property graph of actors, their relationships and the
// subscription index. Every write is appended to a mutation log so the graph
// can be rebuilt by replay.
class GraphRegistry {
 public:
  GraphRegistry() = default;

  void add_node(const ActorId& id, Attributes attrs = {}, Tick since = 0);
  [[nodiscard]] bool has_node(const ActorId& id) const { return index_.contains(id); }
  [[nodiscard]] const NodeRecord& node(const ActorId& id) const;
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
  [[nodiscard]] std::vector<ActorId> nodes_of_kind(std::string_view kind) const;

  const EdgeRecord& add_edge(const ActorId& src, const ActorId& dst, std::string_view type, double weight,
                             Tick valid_from);
  const EdgeRecord& end_edge(const ActorId& src, const ActorId& dst, std::string_view type, Tick valid_to);
  [[nodiscard]] std::optional<EdgeRecord> open_edge(const ActorId& src, const ActorId& dst,
                                                    std::string_view type) const;

  // All edge records ever created, open or closed.
  [[nodiscard]] const std::vector<EdgeRecord>& edges() const { return edges_; }

  // Outgoing / incoming neighbours over edges of `type` valid at `at`, sorted.
  [[nodiscard]] std::vector<ActorId> neighbors(const ActorId& node, std::string_view type, Tick at) const;
  [[nodiscard]] std::vector<ActorId> parents(const ActorId& node, std::string_view type, Tick at) const;

  // Breadth-first closure over outgoing edges that pass `filter` and are
  // valid at `at`. The origin is part of the result.
  [[nodiscard]] std::set<ActorId> traverse(const ActorId& origin, const EdgeFilter& filter, Tick at) const;

  // Nearest node of `kind` (great-circle from origin) among nodes satisfying
  // `pred` and existing at `at`; ties go to the smallest id. Without origin
  // geo the smallest matching id wins.
  [[nodiscard]] std::optional<ActorId> find_service(const ActorId& origin, std::string_view kind,
                                                    const AttrPredicate& pred, Tick at) const;

  const Subscription& subscribe(const ActorId& subscriber, const ActorId& publisher, std::string_view key);
  bool unsubscribe(const ActorId& subscriber, const ActorId& publisher, std::string_view key);
  [[nodiscard]] std::vector<ActorId> subscribers_of(const ActorId& publisher, std::string_view key) const;
  [[nodiscard]] std::size_t subscription_count() const { return subscriptions_.size(); }

  [[nodiscard]] GraphView snapshot_at(Tick t) const;

  [[nodiscard]] const std::vector<GraphMutation>& mutation_log() const { return log_; }

  // Mirrors every subsequent mutation into `log`; existing history is
  // written first so the file always replays to the current graph.
  void persist_to(RecordLog* log);
  static GraphRegistry recover(const RecordLog& log);

  // Builds a fresh registry by replaying mutations with at <= t.
  static GraphRegistry replay(const std::vector<GraphMutation>& log, Tick up_to = kOpen);

  // Throws the error add_edge/end_edge would raise if applied in order.
  void validate(const std::vector<GraphMutation>& pending) const;

 private:
  using NodeIndex = std::size_t;
  using TripleKey = std::tuple<NodeIndex, NodeIndex, std::string>;

  NodeIndex index_of(const ActorId& id) const;
  void record(GraphMutation m);

  std::vector<NodeRecord> nodes_;
  std::map<ActorId, NodeIndex> index_;
  std::vector<EdgeRecord> edges_;
  std::vector<std::vector<std::size_t>> out_;  // node -> edge indices
  std::vector<std::vector<std::size_t>> in_;
  std::map<TripleKey, std::size_t> open_;  // (src,dst,type) -> open edge index
  std::map<TripleKey, Tick> last_end_;     // latest closed valid_to per triple
  std::set<Subscription> subscriptions_;
  std::vector<GraphMutation> log_;
  RecordLog* sink_ = nullptr;
};

// Line-based ingestion:
//   node <kind> <id> [attr=value ...]
//   edge <type> <src kind:id> <dst kind:id> <weight> <valid_from>
// Blank lines and lines starting with '#' are skipped.
void load_graph(GraphRegistry& graph, std::istream& in);
void write_graph(const GraphRegistry& graph, std::ostream& out);

}  // namespace gova
