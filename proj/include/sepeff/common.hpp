// Shared basics: error taxonomy, treatment-arm pair, small utilities.
//
// Error classes map onto CLI exit codes (config -> 2, validation -> 3,
// positivity/fit -> 4), so throw the most specific one that applies.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sepeff {

class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed configuration, JSON, CSV header, CLI arguments.
class config_error : public error {
 public:
  explicit config_error(const std::string& msg) : error(msg) {}
};

// Data that parses but violates the longitudinal protocol (monotonicity,
// absorption, missingness pattern, time indexing).
class validation_error : public error {
 public:
  explicit validation_error(const std::string& msg) : error(msg) {}
};

// Estimated probability at or below the positivity floor, empty conditioning
// cell, weight blow-up.
class positivity_error : public error {
 public:
  explicit positivity_error(const std::string& msg) : error(msg) {}
};

// Model fitting failure (separation, non-convergence, singular information).
class fit_error : public error {
 public:
  explicit fit_error(const std::string& msg) : error(msg) {}
};

// A pair of component-strategy assignments: z_y feeds the outcome-pathway
// component, z_d the competing-event-pathway component. The four arms of the
// hypothetical component trial are the four (z_y, z_d) combinations.
struct ArmPair {
  int z_y = 1;
  int z_d = 1;

  bool operator==(const ArmPair&) const = default;
  std::string label() const {
    return "(" + std::to_string(z_y) + "," + std::to_string(z_d) + ")";
  }
};

// All four arms in reporting order (1,1), (1,0), (0,1), (0,0).
inline std::vector<ArmPair> all_arms() {
  return {{1, 1}, {1, 0}, {0, 1}, {0, 0}};
}

// Hard lower bound for probabilities that enter denominators. Estimators
// throw positivity_error when a required probability is <= this floor unless
// the caller opted into truncation.
inline constexpr double kPositivityFloor = 1e-12;

// FNV-1a over a string; used to fingerprint canonicalised configs so every
// artifact records what produced it.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

}  // namespace sepeff
