#include "gova/types.hpp"

#include <array>
#include <charconv>
#include <mutex>

namespace gova {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::UnknownActor: return "UnknownActor";
    case ErrorCode::UnhandledMessage: return "UnhandledMessage";
    case ErrorCode::PersistenceFailure: return "PersistenceFailure";
    case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::MissingUnit: return "MissingUnit";
    case ErrorCode::ScopeDenied: return "ScopeDenied";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::ClockRegression: return "ClockRegression";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::OverlappingValidity: return "OverlappingValidity";
    case ErrorCode::NoOpenEdge: return "NoOpenEdge";
    case ErrorCode::InvalidInterval: return "InvalidInterval";
    case ErrorCode::InfeasibleBalance: return "InfeasibleBalance";
    case ErrorCode::UncoveredNode: return "UncoveredNode";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NoStateChange: return "NoStateChange";
    case ErrorCode::InsufficientRetention: return "InsufficientRetention";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::AllExcluded: return "AllExcluded";
    case ErrorCode::UnknownActorInTrace: return "UnknownActorInTrace";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

ActorId ActorId::parse(std::string_view text) {
  auto pos = text.find(':');
  if (pos == std::string_view::npos || pos == 0 || pos + 1 == text.size()) {
    throw Error(ErrorCode::ParseError, "bad actor id '" + std::string(text) + "'");
  }
  return ActorId{std::string(text.substr(0, pos)), std::string(text.substr(pos + 1))};
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

std::string value_to_string(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(x);
        } else {
          return x;
        }
      },
      v);
}

namespace {

struct OpCounter {
  std::mutex mu;
  std::map<std::string, std::uint64_t, std::less<>> counts;
};

OpCounter& op_counter() {
  static OpCounter counter;
  return counter;
}

}  // namespace

void note_op(std::string_view name) {
  auto& c = op_counter();
  std::lock_guard lock(c.mu);
  auto it = c.counts.find(name);
  if (it == c.counts.end()) {
    c.counts.emplace(std::string(name), 1);
  } else {
    ++it->second;
  }
}

std::map<std::string, std::uint64_t> op_counts() {
  auto& c = op_counter();
  std::lock_guard lock(c.mu);
  return {c.counts.begin(), c.counts.end()};
}

void reset_op_counts() {
  auto& c = op_counter();
  std::lock_guard lock(c.mu);
  c.counts.clear();
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  // FNV-1a over the salt, folded through splitmix64 with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : salt) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace gova
