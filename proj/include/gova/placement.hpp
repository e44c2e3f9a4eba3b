#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gova/graph_registry.hpp"
#include "gova/types.hpp"

namespace gova {

using SiloId = int;
using TypeFilter = std::set<std::string>;  // empty = every relationship tag

struct Assignment {
  int k = 1;
  std::map<ActorId, SiloId> silo_of;

  [[nodiscard]] SiloId at(const ActorId& id) const;
  [[nodiscard]] std::vector<std::size_t> sizes() const;
  bool operator==(const Assignment&) const = default;
};

struct CutReport {
  double cut_weight = 0.0;
  std::vector<std::size_t> silo_sizes;
  std::vector<double> objective_trace;  // cut after seeding, then after each pass

  [[nodiscard]] std::string to_text() const;
};

// Largest allowed silo: floor(ceil(n/k) * (1 + tol)).
std::size_t balance_cap(std::size_t n, int k, double balance_tol);
bool is_balanced(const Assignment& a, std::size_t n, double balance_tol);

// Sum of weights of filtered edges whose endpoints sit in different silos.
double cut_weight(const GraphView& view, const Assignment& assignment, const TypeFilter& type_filter);

// BFS-region seeding plus move/swap local search; each accepted step strictly
// lowers the cut and keeps every silo within balance_cap. Several seeded
// restarts are refined and the best result (first on ties) is returned.
Assignment partition(const GraphView& view, int k, const TypeFilter& type_filter, double balance_tol,
                     std::uint64_t seed, CutReport* report = nullptr);

// Exhaustive search over balanced assignments (n <= 12). Ties go to the
// lexicographically smallest silo vector over nodes in id order.
std::pair<Assignment, double> brute_force_partition(const GraphView& view, int k, const TypeFilter& type_filter,
                                                    double balance_tol);

struct ViewDelta {
  std::vector<NodeRecord> added_nodes;
  std::vector<ActorId> removed_nodes;
  std::vector<EdgeRecord> added_edges;
  std::vector<EdgeRecord> removed_edges;
};

GraphView apply_delta(const GraphView& view, const ViewDelta& delta);

// Places new nodes on the least-loaded silo, then performs at most
// `move_budget` single-node moves, each strictly reducing the cut.
Assignment rebalance(const GraphView& base, const Assignment& assignment, const ViewDelta& delta, int move_budget,
                     const TypeFilter& type_filter, double balance_tol, CutReport* report = nullptr);

// Uniformly shuffled, round-robin filled assignment.
Assignment random_balanced_assignment(const GraphView& view, int k, std::uint64_t seed);

// `actor_id<TAB>silo_id` lines in id order.
void write_assignment(const Assignment& a, std::ostream& out);
Assignment read_assignment(std::istream& in, int k);

}  // namespace gova
