#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gova/actor_runtime.hpp"
#include "gova/context_store.hpp"
#include "gova/graph_registry.hpp"
#include "gova/types.hpp"

namespace gova {

namespace action {
inline constexpr std::string_view kSwitchToggle = "switch_toggle";
inline constexpr std::string_view kDrCommand = "dr_command";
}  // namespace action

struct ActionLogEntry {
  Tick t = 0;
  ActorId actor;
  std::string action;
  std::map<std::string, std::string> params;

  bool operator==(const ActionLogEntry&) const = default;
};

// Append-only record of operator actions. Text form, one entry per line:
//   t<TAB>actor<TAB>action<TAB>k=v;k=v   ("-" when there are no params)
class ActionLog {
 public:
  void append(ActionLogEntry entry) { entries_.push_back(std::move(entry)); }

  [[nodiscard]] const std::vector<ActionLogEntry>& entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] std::size_t count(std::string_view action) const;

  void write(std::ostream& out) const;
  static ActionLog read(std::istream& in);

 private:
  std::vector<ActionLogEntry> entries_;
};

// A tie switch is Open in its normal state (fed from its "normal_parent"
// attribute) and Closed when transferred (fed from "alt_parent").
enum class SwitchState : std::uint8_t { Open, Closed };
std::string_view to_string(SwitchState s);
SwitchState parse_switch_state(std::string_view text);

struct AffectedSet {
  std::set<ActorId> substations;
  std::set<ActorId> meters;  // meters whose upstream substation changed

  [[nodiscard]] bool empty() const { return substations.empty() && meters.empty(); }
};

struct ReaggregationJob {
  ActorId substation;
  Tick t_start = 0;
  Tick t_end = 0;  // exclusive
  ChangeEvent trigger;
};

struct SwitchToggle {
  ActorId sw;
  SwitchState state = SwitchState::Open;
  Tick t = 0;
};

inline const std::string kAggregateKey = "aggregate_consumption";
inline const std::string kConsumptionKey = "consumption";

// Hourly sum over meters reachable from `substation` along feeds edges valid
// at each hour. Pure; InsufficientRetention when a meter lacks an hourly value.
TimeSeriesSegment compute_reaggregation(const GraphRegistry& graph, const ContextStore& context,
                                        const ActorId& substation, Tick t_start, Tick t_end);

// Meters (and the substations that lose or gain them) whose reachability
// differs between two instants.
AffectedSet affected_between(const GraphRegistry& graph, Tick before, Tick after);

// Re-applies a logged switch toggle to a graph (end old parent edge, add new).
void apply_switch_action(GraphRegistry& graph, const ActionLogEntry& entry);

class Propagator {
 public:
  Propagator(ActorRuntime& runtime, ActionLog& log) : runtime_(runtime), log_(log) {}

  std::vector<ActorId> publish(const ChangeEvent& event) { return runtime_.publish(event); }

  [[nodiscard]] SwitchState switch_state(const ActorId& sw, Tick at) const;

  // Rewires the switch at `t`, notifies its subscribers, logs the action and
  // queues a re-aggregation job for every affected substation.
  AffectedSet propagate_topology_change(const ActorId& sw, SwitchState new_state, Tick t);
  // Applies toggles in (t, switch) order regardless of input order.
  std::vector<AffectedSet> propagate_topology_changes(std::vector<SwitchToggle> toggles);

  // Recomputes the window and overwrites the substation's aggregate series.
  TimeSeriesSegment reaggregate(const ActorId& substation, Tick t_start, Tick t_end);

  std::size_t run_jobs();
  [[nodiscard]] const std::vector<ReaggregationJob>& pending_jobs() const { return pending_; }
  [[nodiscard]] const std::vector<ReaggregationJob>& completed_jobs() const { return completed_; }

  // Jobs cover [history_start, toggle time).
  void set_history_start(Tick t) { history_start_ = t; }

 private:
  ActorRuntime& runtime_;
  ActionLog& log_;
  std::vector<ReaggregationJob> pending_;
  std::vector<ReaggregationJob> completed_;
  Tick history_start_ = 0;
};

}  // namespace gova
