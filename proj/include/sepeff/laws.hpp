// Complete discrete conditional law sets.
//
// A TableLawSet carries, for each arm value z and each dense history id, the
// conditionals the identification formula consumes:
//   y_haz(t, z, h_{t-1})  = P(Y_t = 1 | D_t = Y_{t-1} = C_t = 0, hist, Z = z,
//                             adherent through t)
//   d_haz(t, z, h_{t-1})  = P(D_t = 1 | D_{t-1} = Y_{t-1} = C_t = 0, ...)
//   cr(t, z, h_{t-1})     = P(C_t = 0, R_t = 1 | at risk, adherent through
//                             t-1, hist, Z = z)
//   ld(t, z, h_{t-1})     = law of the D-block covariates at t
//   ly(t, z, h_{t-1}, ld) = law of the Y-block covariates at t given the
//                           realized D-block cell
// Cells may be NaN ("never fitted"); touching a NaN cell with positive mass
// raises positivity_error.
#pragma once

#include <array>
#include <vector>

#include "sepeff/common.hpp"
#include "sepeff/data.hpp"
#include "sepeff/histories.hpp"

namespace sepeff {

struct TableLawSet {
  CovariateSchema schema;
  int horizon = 0;  // K+1
  HistoryCoder coder;
  std::array<double, 2> pz = {0.5, 0.5};

  // Outer index t (hazards/cr: 1..K+1, slot 0 unused; covariate laws: 0..K),
  // then arm z, then a flat table (see index helpers).
  std::vector<std::array<std::vector<double>, 2>> y_haz_t;
  std::vector<std::array<std::vector<double>, 2>> d_haz_t;
  std::vector<std::array<std::vector<double>, 2>> cr_t;
  std::vector<std::array<std::vector<double>, 2>> ld_t;  // [key * cells + v]
  std::vector<std::array<std::vector<double>, 2>> ly_t;  // [lykey * cells + v]

  static TableLawSet empty(const CovariateSchema& schema, int horizon);
  int K() const { return horizon - 1; }

  double y_haz(int t, int z, long long h_prev) const;
  double d_haz(int t, int z, long long h_prev) const;
  double cr(int t, int z, long long h_prev) const;
  double ld(int t, int z, long long h_prev, long long ld_cell) const;
  double ly(int t, int z, long long h_prev, long long ld_cell,
            long long ly_cell) const;

  double& y_haz_ref(int t, int z, long long h_prev);
  double& d_haz_ref(int t, int z, long long h_prev);
  double& cr_ref(int t, int z, long long h_prev);
  double& ld_ref(int t, int z, long long h_prev, long long ld_cell);
  double& ly_ref(int t, int z, long long h_prev, long long ld_cell,
                 long long ly_cell);

  // Sanity sweep: probabilities in [0,1], law rows summing to 1 where
  // defined. Returns problem descriptions (empty = clean).
  std::vector<std::string> check() const;
};

// Read every conditional off a fitted NuisanceSet (all five roles saturated
// or degenerate). Cells never seen in fitting stay NaN; collapsed-key tables
// broadcast their marginal row across histories.
struct NuisanceSet;  // fwd (models.hpp)
TableLawSet materialize_laws(const NuisanceSet& fits);

}  // namespace sepeff
