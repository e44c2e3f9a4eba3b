#include "gova/placement.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace gova {

SiloId Assignment::at(const ActorId& id) const {
  auto it = silo_of.find(id);
  if (it == silo_of.end()) throw Error(ErrorCode::UncoveredNode, id.str());
  return it->second;
}

std::vector<std::size_t> Assignment::sizes() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(std::max(k, 1)), 0);
  for (const auto& [id, s] : silo_of) ++out.at(static_cast<std::size_t>(s));
  return out;
}

std::string CutReport::to_text() const {
  std::ostringstream out;
  out << "cut_weight = " << format_double(cut_weight) << '\n';
  out << "silo_sizes =";
  for (auto s : silo_sizes) out << ' ' << s;
  out << '\n';
  out << "objective_trace =";
  for (auto v : objective_trace) out << ' ' << format_double(v);
  out << '\n';
  return out.str();
}

std::size_t balance_cap(std::size_t n, int k, double balance_tol) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (balance_tol < 0) throw Error(ErrorCode::InvalidArgument, "balance_tol must be >= 0");
  const auto per = (n + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
  // Small epsilon keeps e.g. 10 * 1.1 from flooring to 10.999... -> 10.
  return static_cast<std::size_t>(std::floor(static_cast<double>(per) * (1.0 + balance_tol) + 1e-9));
}

bool is_balanced(const Assignment& a, std::size_t n, double balance_tol) {
  const auto cap = balance_cap(n, a.k, balance_tol);
  for (auto s : a.sizes()) {
    if (s > cap) return false;
  }
  return true;
}

double cut_weight(const GraphView& view, const Assignment& assignment, const TypeFilter& type_filter) {
  note_op("placement.cut_weight");
  for (const auto& n : view.nodes()) {
    if (!assignment.silo_of.contains(n.id)) throw Error(ErrorCode::UncoveredNode, n.id.str());
  }
  double cut = 0.0;
  for (const auto& e : view.edges_of(type_filter)) {
    if (assignment.at(e.src) != assignment.at(e.dst)) cut += e.weight;
  }
  return cut;
}

namespace {

// Undirected weighted graph over dense indices, parallel edges merged.
struct DenseGraph {
  std::vector<ActorId> ids;
  std::map<ActorId, int> index;
  std::vector<std::vector<std::pair<int, double>>> adj;  // sorted by neighbour
  double total_weight = 0.0;

  DenseGraph(const GraphView& view, const TypeFilter& filter) {
    for (const auto& n : view.nodes()) {
      index.emplace(n.id, static_cast<int>(ids.size()));
      ids.push_back(n.id);
    }
    std::vector<std::map<int, double>> acc(ids.size());
    for (const auto& e : view.edges_of(filter)) {
      auto s = index.find(e.src);
      auto d = index.find(e.dst);
      if (s == index.end() || d == index.end() || s->second == d->second) continue;
      acc[s->second][d->second] += e.weight;
      acc[d->second][s->second] += e.weight;
      total_weight += e.weight;
    }
    adj.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) adj[i].assign(acc[i].begin(), acc[i].end());
  }

  [[nodiscard]] int size() const { return static_cast<int>(ids.size()); }

  [[nodiscard]] double weight(int u, int v) const {
    const auto& row = adj[u];
    auto it = std::lower_bound(row.begin(), row.end(), v, [](const auto& p, int x) { return p.first < x; });
    return (it != row.end() && it->first == v) ? it->second : 0.0;
  }

  [[nodiscard]] double cut(const std::vector<int>& silo) const {
    double c = 0.0;
    for (int u = 0; u < size(); ++u) {
      for (const auto& [v, w] : adj[u]) {
        if (u < v && silo[u] != silo[v]) c += w;
      }
    }
    return c;
  }
};

// Incremental gain bookkeeping for local search.
class Refiner {
 public:
  Refiner(const DenseGraph& g, int k, std::size_t cap, std::vector<int> silo)
      : g_(g), k_(k), cap_(cap), silo_(std::move(silo)), sizes_(static_cast<std::size_t>(k), 0),
        conn_(static_cast<std::size_t>(g.size()) * static_cast<std::size_t>(k), 0.0),
        eps_(1e-12 * (1.0 + g.total_weight)) {
    for (int u = 0; u < g_.size(); ++u) {
      ++sizes_[static_cast<std::size_t>(silo_[u])];
      for (const auto& [v, w] : g_.adj[u]) conn(u, silo_[v]) += w;
    }
  }

  double& conn(int u, int s) { return conn_[static_cast<std::size_t>(u) * static_cast<std::size_t>(k_) + s]; }

  void move(int u, int to) {
    const int from = silo_[u];
    for (const auto& [v, w] : g_.adj[u]) {
      conn(v, from) -= w;
      conn(v, to) += w;
    }
    --sizes_[static_cast<std::size_t>(from)];
    ++sizes_[static_cast<std::size_t>(to)];
    silo_[u] = to;
  }

  // Best strictly improving move for u, or -1.
  std::pair<int, double> best_move(int u) {
    const int a = silo_[u];
    int best = -1;
    double best_gain = eps_;
    for (int s = 0; s < k_; ++s) {
      if (s == a || sizes_[static_cast<std::size_t>(s)] + 1 > cap_) continue;
      const double gain = conn(u, s) - conn(u, a);
      if (gain > best_gain) {
        best_gain = gain;
        best = s;
      }
    }
    return {best, best_gain};
  }

  bool move_pass() {
    bool improved = false;
    for (int u = 0; u < g_.size(); ++u) {
      auto [s, gain] = best_move(u);
      if (s >= 0) {
        move(u, s);
        improved = true;
      }
    }
    return improved;
  }

  bool swap_pass() {
    bool improved = false;
    for (int u = 0; u < g_.size(); ++u) {
      int best_v = -1;
      double best_gain = eps_;
      const int a = silo_[u];
      for (int v = 0; v < g_.size(); ++v) {
        const int b = silo_[v];
        if (b == a) continue;
        const double gain = (conn(u, b) - conn(u, a)) + (conn(v, a) - conn(v, b)) - 2.0 * g_.weight(u, v);
        if (gain > best_gain) {
          best_gain = gain;
          best_v = v;
        }
      }
      if (best_v >= 0) {
        const int b = silo_[best_v];
        move(u, b);
        move(best_v, a);
        improved = true;
      }
    }
    return improved;
  }

  void refine(std::vector<double>* trace) {
    if (trace) trace->push_back(g_.cut(silo_));
    for (;;) {
      bool improved = move_pass();
      improved = swap_pass() || improved;
      if (!improved) break;
      if (trace) trace->push_back(g_.cut(silo_));
    }
  }

  [[nodiscard]] const std::vector<int>& silo() const { return silo_; }
  [[nodiscard]] const std::vector<std::size_t>& sizes() const { return sizes_; }
  [[nodiscard]] double eps() const { return eps_; }

 private:
  const DenseGraph& g_;
  int k_;
  std::size_t cap_;
  std::vector<int> silo_;
  std::vector<std::size_t> sizes_;
  std::vector<double> conn_;
  double eps_;
};

std::vector<int> bfs_distances(const DenseGraph& g, const std::vector<int>& sources) {
  std::vector<int> dist(static_cast<std::size_t>(g.size()), std::numeric_limits<int>::max());
  std::deque<int> q;
  for (int s : sources) {
    dist[s] = 0;
    q.push_back(s);
  }
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (const auto& [v, w] : g.adj[u]) {
      if (dist[v] == std::numeric_limits<int>::max()) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
    }
  }
  return dist;
}

std::vector<int> bfs_region_seed(const DenseGraph& g, int k, std::mt19937_64& rng) {
  const int n = g.size();
  const auto target = static_cast<std::size_t>((n + k - 1) / k);
  std::vector<int> seeds{static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng))};
  while (static_cast<int>(seeds.size()) < k) {
    auto dist = bfs_distances(g, seeds);
    int far = -1;
    for (int u = 0; u < n; ++u) {
      if (std::find(seeds.begin(), seeds.end(), u) != seeds.end()) continue;
      if (far < 0 || dist[u] > dist[far]) far = u;
    }
    seeds.push_back(far);
  }

  std::vector<int> silo(static_cast<std::size_t>(n), -1);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  std::vector<std::deque<int>> frontier(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) frontier[s].push_back(seeds[s]);
  int assigned = 0;
  while (assigned < n) {
    bool progressed = false;
    for (int s = 0; s < k && assigned < n; ++s) {
      if (sizes[s] >= target) continue;
      auto& f = frontier[s];
      while (!f.empty() && silo[f.front()] != -1) f.pop_front();
      if (f.empty()) continue;
      int u = f.front();
      f.pop_front();
      silo[u] = s;
      ++sizes[s];
      ++assigned;
      progressed = true;
      for (const auto& [v, w] : g.adj[u]) {
        if (silo[v] == -1) f.push_back(v);
      }
    }
    if (!progressed) {
      // Disconnected remainder: restart the least-loaded region at the first free node.
      int s = static_cast<int>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
      for (int u = 0; u < n; ++u) {
        if (silo[u] == -1) {
          frontier[s].push_back(u);
          break;
        }
      }
    }
  }
  return silo;
}

std::vector<int> random_seed(int n, int k, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> silo(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) silo[order[i]] = i % k;
  return silo;
}

Assignment to_assignment(const DenseGraph& g, int k, const std::vector<int>& silo) {
  Assignment a;
  a.k = k;
  for (int u = 0; u < g.size(); ++u) a.silo_of.emplace(g.ids[u], silo[u]);
  return a;
}

constexpr int kRestarts = 8;

}  // namespace

Assignment partition(const GraphView& view, int k, const TypeFilter& type_filter, double balance_tol,
                     std::uint64_t seed, CutReport* report) {
  note_op("placement.partition");
  const auto n = view.node_count();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorCode::InvalidArgument, "k must be in [1, node count]");
  }
  const auto cap = balance_cap(n, k, balance_tol);
  if (cap * static_cast<std::size_t>(k) < n) throw Error(ErrorCode::InfeasibleBalance, "capacity below node count");

  DenseGraph g(view, type_filter);
  std::mt19937_64 rng(seed);
  std::vector<int> best;
  double best_cut = std::numeric_limits<double>::infinity();
  std::vector<double> best_trace;
  for (int r = 0; r < kRestarts; ++r) {
    auto start = (r % 2 == 0) ? bfs_region_seed(g, k, rng) : random_seed(g.size(), k, rng);
    Refiner refiner(g, k, cap, std::move(start));
    std::vector<double> trace;
    refiner.refine(&trace);
    const double c = g.cut(refiner.silo());
    if (c < best_cut - refiner.eps()) {
      best_cut = c;
      best = refiner.silo();
      best_trace = std::move(trace);
    }
  }
  auto out = to_assignment(g, k, best);
  if (report) {
    report->cut_weight = cut_weight(view, out, type_filter);
    report->silo_sizes = out.sizes();
    report->objective_trace = std::move(best_trace);
  }
  return out;
}

std::pair<Assignment, double> brute_force_partition(const GraphView& view, int k, const TypeFilter& type_filter,
                                                    double balance_tol) {
  const auto n = view.node_count();
  if (n > 12) throw Error(ErrorCode::TooLarge, "brute force supports at most 12 nodes");
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorCode::InvalidArgument, "k must be in [1, node count]");
  }
  const auto cap = balance_cap(n, k, balance_tol);
  DenseGraph g(view, type_filter);
  std::vector<int> silo(n, 0);
  std::vector<int> best;
  double best_cut = std::numeric_limits<double>::infinity();
  const double eps = 1e-12 * (1.0 + g.total_weight);
  for (;;) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int s : silo) ++sizes[s];
    if (std::all_of(sizes.begin(), sizes.end(), [&](auto c) { return c <= cap; })) {
      const double c = g.cut(silo);
      if (c < best_cut - eps) {
        best_cut = c;
        best = silo;
      }
    }
    // Next assignment in lexicographic order (node 0 most significant).
    int i = static_cast<int>(n) - 1;
    while (i >= 0 && silo[i] == k - 1) silo[i--] = 0;
    if (i < 0) break;
    ++silo[i];
  }
  if (best.empty()) throw Error(ErrorCode::InfeasibleBalance, "no balanced assignment");
  auto a = to_assignment(g, k, best);
  return {a, cut_weight(view, a, type_filter)};
}

GraphView apply_delta(const GraphView& view, const ViewDelta& delta) {
  std::map<ActorId, NodeRecord> nodes;
  for (const auto& n : view.nodes()) nodes.emplace(n.id, n);
  for (const auto& id : delta.removed_nodes) {
    if (nodes.erase(id) == 0) throw Error(ErrorCode::UnknownActor, "removed node " + id.str() + " not in view");
  }
  for (const auto& n : delta.added_nodes) {
    if (!nodes.emplace(n.id, n).second) throw Error(ErrorCode::DuplicateId, n.id.str());
  }
  std::multiset<EdgeRecord> edges(view.edges().begin(), view.edges().end());
  for (const auto& e : delta.removed_edges) {
    auto it = edges.find(e);
    if (it == edges.end()) throw Error(ErrorCode::NotFound, "removed edge not in view");
    edges.erase(it);
  }
  std::vector<EdgeRecord> kept;
  for (const auto& e : edges) {
    if (nodes.contains(e.src) && nodes.contains(e.dst)) kept.push_back(e);
  }
  for (const auto& e : delta.added_edges) {
    if (!nodes.contains(e.src) || !nodes.contains(e.dst)) {
      throw Error(ErrorCode::UnknownActor, "added edge endpoint missing: " + e.src.str() + " -> " + e.dst.str());
    }
    kept.push_back(e);
  }
  std::vector<NodeRecord> node_list;
  for (auto& [id, n] : nodes) node_list.push_back(std::move(n));
  return GraphView(view.at(), std::move(node_list), std::move(kept));
}

Assignment rebalance(const GraphView& base, const Assignment& assignment, const ViewDelta& delta, int move_budget,
                     const TypeFilter& type_filter, double balance_tol, CutReport* report) {
  note_op("placement.rebalance");
  const GraphView view = apply_delta(base, delta);
  const int k = assignment.k;
  const auto n = view.node_count();
  const auto cap = balance_cap(n, k, balance_tol);
  DenseGraph g(view, type_filter);

  std::vector<int> silo(n, -1);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int u = 0; u < g.size(); ++u) {
    auto it = assignment.silo_of.find(g.ids[u]);
    if (it != assignment.silo_of.end()) {
      silo[u] = it->second;
      ++sizes[it->second];
    }
  }
  for (int u = 0; u < g.size(); ++u) {
    if (silo[u] != -1) continue;
    int s = static_cast<int>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
    silo[u] = s;
    ++sizes[s];
  }

  Refiner refiner(g, k, cap, std::move(silo));
  std::vector<double> trace{g.cut(refiner.silo())};
  int budget = move_budget;

  // Shrink overloaded silos first (node removal can leave a silo above cap).
  auto overloaded = [&] {
    for (int s = 0; s < k; ++s) {
      if (refiner.sizes()[s] > cap) return s;
    }
    return -1;
  };
  for (int over = overloaded(); over >= 0 && budget > 0; over = overloaded(), --budget) {
    int best_u = -1, best_s = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (int u = 0; u < g.size(); ++u) {
      if (refiner.silo()[u] != over) continue;
      for (int s = 0; s < k; ++s) {
        if (s == over || refiner.sizes()[s] + 1 > cap) continue;
        double gain = refiner.conn(u, s) - refiner.conn(u, over);
        if (gain > best_gain) {
          best_gain = gain;
          best_u = u;
          best_s = s;
        }
      }
    }
    if (best_u < 0) break;
    refiner.move(best_u, best_s);
    trace.push_back(g.cut(refiner.silo()));
  }
  if (overloaded() >= 0) throw Error(ErrorCode::InfeasibleBalance, "silo above cap after rebalance budget");

  for (; budget > 0; --budget) {
    int best_u = -1, best_s = -1;
    double best_gain = refiner.eps();
    for (int u = 0; u < g.size(); ++u) {
      auto [s, gain] = refiner.best_move(u);
      if (s >= 0 && gain > best_gain) {
        best_gain = gain;
        best_u = u;
        best_s = s;
      }
    }
    if (best_u < 0) break;
    refiner.move(best_u, best_s);
    trace.push_back(g.cut(refiner.silo()));
  }

  auto out = to_assignment(g, k, refiner.silo());
  if (report) {
    report->cut_weight = cut_weight(view, out, type_filter);
    report->silo_sizes = out.sizes();
    report->objective_trace = std::move(trace);
  }
  return out;
}

Assignment random_balanced_assignment(const GraphView& view, int k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<ActorId> ids;
  for (const auto& n : view.nodes()) ids.push_back(n.id);
  std::shuffle(ids.begin(), ids.end(), rng);
  Assignment a;
  a.k = k;
  for (std::size_t i = 0; i < ids.size(); ++i) a.silo_of.emplace(ids[i], static_cast<int>(i % k));
  return a;
}

void write_assignment(const Assignment& a, std::ostream& out) {
  for (const auto& [id, s] : a.silo_of) out << id.str() << '\t' << s << '\n';
}

Assignment read_assignment(std::istream& in, int k) {
  Assignment a;
  a.k = k;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::ParseError, "assignment line without tab: " + line);
    const auto field = line.substr(tab + 1);
    int s = -1;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), s);
    if (ec != std::errc{} || end != field.data() + field.size()) {
      throw Error(ErrorCode::ParseError, "bad silo id: " + line);
    }
    if (s < 0 || s >= k) throw Error(ErrorCode::ParseError, "silo out of range: " + line);
    a.silo_of.emplace(ActorId::parse(line.substr(0, tab)), s);
  }
  return a;
}

}  // namespace gova
