#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace gova {

// Virtual time. One tick is one simulated nanosecond.
using Tick = std::int64_t;

inline constexpr Tick kSecond = 1'000'000'000;
inline constexpr Tick kMinute = 60 * kSecond;
inline constexpr Tick kHour = 60 * kMinute;
inline constexpr Tick kDay = 24 * kHour;
inline constexpr Tick kOpen = std::numeric_limits<Tick>::max();

enum class ErrorCode {
  DuplicateId,
  UnknownKind,
  UnknownActor,
  UnhandledMessage,
  PersistenceFailure,
  CorruptSnapshot,
  MissingUnit,
  ScopeDenied,
  NotFound,
  ClockRegression,
  EmptySegment,
  OverlappingValidity,
  NoOpenEdge,
  InvalidInterval,
  InfeasibleBalance,
  UncoveredNode,
  TooLarge,
  NoStateChange,
  InsufficientRetention,
  InvalidSpec,
  ResolutionTooCoarse,
  UnknownScenario,
  AllExcluded,
  UnknownActorInTrace,
  InvalidArgument,
  ParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Identity of a virtual actor: (kind, local_id), unique system-wide.
struct ActorId {
  std::string kind;
  std::string local_id;

  auto operator<=>(const ActorId&) const = default;
  bool operator==(const ActorId&) const = default;

  [[nodiscard]] std::string str() const { return kind + ":" + local_id; }
  [[nodiscard]] bool empty() const { return kind.empty() && local_id.empty(); }

  // Parses "kind:local_id"; the local id may itself contain ':'.
  static ActorId parse(std::string_view text);
};

// Sender identity for messages injected from outside the actor population
// (device layer, scenario scripts). Never a spawned actor.
inline const ActorId kSystemActor{"", "system"};

using Value = std::variant<bool, std::int64_t, double, std::string>;
using KeyValueMap = std::map<std::string, Value>;

std::string value_to_string(const Value& v);

// Shortest round-trip decimal representation; stable across runs.
std::string format_double(double v);

// Counts invocations of public operations so scenario harnesses can assert
// which parts of the system a run exercised.
void note_op(std::string_view name);
std::map<std::string, std::uint64_t> op_counts();
void reset_op_counts();

// Stable 64-bit mixing for deriving per-entity seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

}  // namespace gova

template <>
struct std::hash<gova::ActorId> {
  std::size_t operator()(const gova::ActorId& id) const noexcept {
    std::size_t h = std::hash<std::string>{}(id.kind);
    return h ^ (std::hash<std::string>{}(id.local_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};
