#include "sepeff/rng.hpp"

namespace sepeff {

std::vector<double> multinomial_counts(Rng& rng, std::size_t n) {
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    counts[rng.below(n)] += 1.0;
  }
  return counts;
}

}  // namespace sepeff
