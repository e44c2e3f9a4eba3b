#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gova {

struct RunConfig {
  std::string command;  // build | scenario | place | cost | all
  std::optional<std::string> spec_path;
  std::string name;
  int k = 3;
  double balance_tol = 0.1;
  std::optional<std::uint64_t> seed;
  std::string output_dir = ".";
  double hot_min = 2.0;
  double cold_max = 0.25;
  double half_life_h = 24.0;
  std::optional<std::string> config_path;

  // Stable key/value echo written into every report.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> echo() const;
};

// Exit codes: 0 all assertions passed, 1 assertion failure, 2 usage or config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gova
