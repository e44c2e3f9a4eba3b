#pragma once

#include <string>

#include "gova/types.hpp"

namespace gova {

// Simulated time source. Monotonically nondecreasing; never reads wall time.
class VirtualClock {
 public:
  VirtualClock() = default;
  explicit VirtualClock(Tick start) : now_(start) {}

  [[nodiscard]] Tick now() const { return now_; }

  void advance_to(Tick t) {
    if (t < now_) {
      throw Error(ErrorCode::ClockRegression, std::to_string(t) + " < " + std::to_string(now_));
    }
    now_ = t;
  }

  void advance_by(Tick d) { advance_to(now_ + d); }

 private:
  Tick now_ = 0;
};

}  // namespace gova
