// Dense integer coding of discrete covariate histories.
//
// Estimator tables are keyed by (time, history id) where the history id is a
// mixed-radix integer over the covariate levels observed so far. Time 0 codes
// the baseline covariates, later times code the time-varying covariates; at
// every time the cell splits into a competing-pathway (D-block) part and an
// outcome-pathway (Y-block) part because the law factorization draws the
// D-block first.
#pragma once

#include <vector>

#include "sepeff/common.hpp"
#include "sepeff/data.hpp"

namespace sepeff {

struct HistoryCoder {
  CovariateSchema schema;
  int K = 0;
  // Per time t = 0..K: cell counts for the D block, the Y block, and both.
  std::vector<long long> ld_cells;
  std::vector<long long> ly_cells;
  std::vector<long long> cells;
  // n_hist[t] = number of distinct full histories l_0..l_t; histories through
  // t index a dense range [0, n_hist[t]).
  std::vector<long long> n_hist;

  // Throws config_error when a covariate is continuous or the history space
  // does not fit in 62 bits.
  static HistoryCoder build(const CovariateSchema& schema, int K);

  // Codes for the covariate vector at time t (baseline defs at t = 0,
  // time-varying defs otherwise). Values must be integral and in range.
  long long ld_code(const std::vector<double>& values, int t) const;
  long long ly_code(const std::vector<double>& values, int t) const;
  long long cell_code(long long ld, long long ly, int t) const {
    return ld * ly_cells[t] + ly;
  }

  // History id through time t from the id through t-1 (use 0 at t = 0).
  long long extend(long long h_prev, long long cell, int t) const {
    return h_prev * cells[t] + cell;
  }
  // Conditioning key for the Y-block law at time t: history through t-1 plus
  // the realized D-block cell at t.
  long long ly_key(long long h_prev, long long ld, int t) const {
    return h_prev * ld_cells[t] + ld;
  }

  // Decompose a history id through time t into per-time (ld, ly) cells.
  void decode(long long h, int t, std::vector<long long>* ld,
              std::vector<long long>* ly) const;
};

// Reconstruct the covariate value vector for a (time, cell) pair; inverse of
// the coding above, used when enumerating histories.
std::vector<double> cell_values(const CovariateSchema& schema, int t,
                                long long ld, long long ly);

}  // namespace sepeff
