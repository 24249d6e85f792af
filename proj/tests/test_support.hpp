// Shared test oracles, written before the estimators they check and kept
// deliberately naive.
//
// flat_two_period_risk transcribes the identification sum for horizon 2
// (K = 1) as literal nested loops over every covariate cell: no recursion,
// no zero-mass skipping, no shared code with the production evaluator. Any
// agreement between this and the estimator routes is therefore evidence, not
// tautology.
#pragma once

#include <array>
#include <vector>

#include "sepeff/common.hpp"
#include "sepeff/laws.hpp"

namespace sepeff_test {

// Risk of the event by end of interval 1 and 2 under (z_Y, z_D), full
// adherence, no censoring. Requires laws.horizon == 2.
inline std::array<double, 2> flat_two_period_risk(
    const sepeff::TableLawSet& laws, sepeff::ArmPair arm) {
  const sepeff::HistoryCoder& coder = laws.coder;
  if (laws.horizon != 2) throw sepeff::config_error("oracle expects K = 1");
  const int zy = arm.z_y;
  const int zd = arm.z_d;

  double risk1 = 0.0;
  double risk2 = 0.0;
  for (long long d0 = 0; d0 < coder.ld_cells[0]; ++d0) {
    for (long long y0 = 0; y0 < coder.ly_cells[0]; ++y0) {
      long long h0 = coder.extend(0, coder.cell_code(d0, y0, 0), 0);
      double base = laws.ld(0, zd, 0, d0) * laws.ly(0, zy, 0, d0, y0);
      double surv_d1 = 1.0 - laws.d_haz(1, zd, h0);
      risk1 += base * surv_d1 * laws.y_haz(1, zy, h0);
      double alive1 = base * surv_d1 * (1.0 - laws.y_haz(1, zy, h0));
      for (long long d1 = 0; d1 < coder.ld_cells[1]; ++d1) {
        for (long long y1 = 0; y1 < coder.ly_cells[1]; ++y1) {
          long long h1 = coder.extend(h0, coder.cell_code(d1, y1, 1), 1);
          double step = laws.ld(1, zd, h0, d1) * laws.ly(1, zy, h0, d1, y1) *
                        (1.0 - laws.d_haz(2, zd, h1)) * laws.y_haz(2, zy, h1);
          risk2 += alive1 * step;
        }
      }
    }
  }
  risk2 += risk1;
  return {risk1, risk2};
}

}  // namespace sepeff_test
