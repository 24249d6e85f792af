// Batch command-line front door.
//
// Subcommands: validate | graph convert | graph dsep | graph check-dcc |
// fit | estimate | contrast | simulate | truth | coverage.
// Global flags: --seed, --threads, --out. Exit codes: 0 success, 2 config
// parse error, 3 data validation failure, 4 positivity/fit failure. Errors
// are also emitted as machine-readable JSON.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sepeff/estimators.hpp"

namespace sepeff {

struct RunConfig {
  std::string command;
  std::string data_path;
  std::string schema_path;
  std::string models_path;
  std::string graph_path;
  std::string dgp_path;
  std::string scenario_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 0;
  std::uint64_t fingerprint() const;
};

int dispatch(int argc, const char* const* argv);

// Tidy CSV: arm,k,risk,lower,upper (lower/upper empty without a bootstrap).
std::string emit_curves(const std::vector<EstimateReport>& reports);

}  // namespace sepeff
