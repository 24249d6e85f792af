// Estimators for the sustained-strategy counterfactual risk
// P(Y_{K+1} = 1 under components z_Y, z_D, no censoring, full adherence).
//
// Four routes to the same estimand:
//   * evaluate_g_formula / plug_in_estimate — the nested sum-product
//     identification formula over discrete histories,
//   * weighted_y_estimate — inverse-probability weighting of observed events
//     in the Z = z_D arm with outcome-hazard and Y-block covariate ratios,
//   * weighted_d_estimate — the mirror route over the Z = z_Y arm with
//     competing-hazard and D-block covariate ratios,
//   * one_step_estimate — plug-in plus the empirical mean of the influence
//     function (doubly robust).
//
// All estimators accept per-individual nonnegative weights; bootstrap
// resampling and exact population enumeration both enter through weights.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sepeff/common.hpp"
#include "sepeff/data.hpp"
#include "sepeff/laws.hpp"
#include "sepeff/models.hpp"

namespace sepeff {

struct RiskCurve {
  ArmPair arm;
  std::vector<double> values;  // risk at k = 1..K+1

  double terminal() const { return values.empty() ? 0.0 : values.back(); }
};

struct EstimatorOptions {
  double floor = kPositivityFloor;
  // false: probabilities at/below floor in a denominator raise
  // positivity_error; true: truncate to floor and count the event.
  bool truncate = false;
};

struct Diagnostics {
  std::vector<double> ess_per_time;  // effective mass contributing at each s
  double max_weight = 0.0;
  long long positivity_truncations = 0;
  std::vector<std::string> warnings;
};

struct EstimateReport {
  ArmPair arm;
  std::string estimator;
  std::vector<double> curve;  // risk at k = 1..K+1
  double terminal = 0.0;
  std::string fingerprint;  // config fingerprint + seed, set by callers
  Diagnostics diagnostics;
  // Percentile interval per curve entry when a bootstrap ran.
  std::vector<double> lower, upper;
  // Terminal-risk bootstrap replicates (NaN = failed resample); kept so
  // contrasts can difference per replicate.
  std::vector<double> replicates;

  std::string to_json_text() const;
};

// ---------------------------------------------------------------------------
// Probability source: the estimator-facing view of conditional laws, either
// exact tables or fitted models, queried at a record's realized history.
class ProbSource {
 public:
  virtual ~ProbSource() = default;
  virtual double y_haz(int t, int z, const Trajectory& traj) const = 0;
  virtual double d_haz(int t, int z, const Trajectory& traj) const = 0;
  virtual double cr(int t, int z, const Trajectory& traj) const = 0;
  // Law of the realized covariate cell at time t (1.0 for empty blocks).
  virtual double ld(int t, int z, const Trajectory& traj) const = 0;
  virtual double ly(int t, int z, const Trajectory& traj) const = 0;
  virtual double pz(int z) const = 0;
};

class LawProbSource final : public ProbSource {
 public:
  explicit LawProbSource(const TableLawSet& laws) : laws_(&laws) {}
  double y_haz(int t, int z, const Trajectory& traj) const override;
  double d_haz(int t, int z, const Trajectory& traj) const override;
  double cr(int t, int z, const Trajectory& traj) const override;
  double ld(int t, int z, const Trajectory& traj) const override;
  double ly(int t, int z, const Trajectory& traj) const override;
  double pz(int z) const override { return laws_->pz[z]; }

 private:
  long long hist_id(const Trajectory& traj, int through_t) const;
  const TableLawSet* laws_;
};

class FitProbSource final : public ProbSource {
 public:
  explicit FitProbSource(const NuisanceSet& fits) : fits_(&fits) {}
  double y_haz(int t, int z, const Trajectory& traj) const override;
  double d_haz(int t, int z, const Trajectory& traj) const override;
  double cr(int t, int z, const Trajectory& traj) const override;
  double ld(int t, int z, const Trajectory& traj) const override;
  double ly(int t, int z, const Trajectory& traj) const override;
  double pz(int z) const override { return fits_->pz(z); }

 private:
  const NuisanceSet* fits_;
};

// ---------------------------------------------------------------------------
// Route 1: the identification formula on complete discrete laws.
RiskCurve evaluate_g_formula(const TableLawSet& laws, ArmPair arm, int horizon,
                             const EstimatorOptions& opts = {});

EstimateReport plug_in_estimate(const TrialDataset& data,
                                const NuisanceSpec& spec, ArmPair arm,
                                const EstimatorOptions& opts = {});

// ---------------------------------------------------------------------------
// Weighted routes.

struct WeightTrajectory {
  ArmPair arm;
  char route = 'Y';  // 'Y' or 'D'
  int n = 0;
  int horizon = 0;
  // Flattened [i * horizon + s], s = 0..K. `active` is the indicator
  // I(Z = conditioning arm, C_{s+1} = 0, adherent through s+1, event-free
  // through s); weights below are meaningful only where active.
  std::vector<std::uint8_t> active;
  std::vector<double> log_cr;     // -log prod of continuation propensities
  std::vector<double> log_ratio;  // hazard-survival ratio product
  std::vector<double> log_l;      // covariate-law ratio product
  // Route Y only: outcome-hazard ratio at s+1, applied to event terms; NaN
  // when the denominator hazard is 0 for a record that cannot contribute.
  std::vector<double> event_factor;
  // exp(log_cr + log_ratio + log_l) where active, else 0.
  std::vector<double> total;
  long long truncations = 0;  // denominators clamped to the floor

  double weight(int i, int s) const { return total[i * horizon + s]; }
};

// `weights` (when given) lets resampling callers skip zero-weight records,
// whose fitted rows may not exist in the resample and whose contribution is
// zero regardless.
WeightTrajectory weight_trajectories(const std::vector<Trajectory>& trajs,
                                     const ProbSource& probs, ArmPair arm,
                                     char route,
                                     const EstimatorOptions& opts = {},
                                     const std::vector<double>* weights = nullptr);

EstimateReport weighted_y_estimate(const TrialDataset& data,
                                   const NuisanceSpec& spec, ArmPair arm,
                                   const EstimatorOptions& opts = {});
EstimateReport weighted_d_estimate(const TrialDataset& data,
                                   const NuisanceSpec& spec, ArmPair arm,
                                   const EstimatorOptions& opts = {});

// Trajectory-level cores (used by bootstrap/coverage loops and population
// runs; `weights` empty = all ones).
EstimateReport weighted_estimate_core(const std::vector<Trajectory>& trajs,
                                      const std::vector<double>& weights,
                                      const ProbSource& probs, ArmPair arm,
                                      char route, int horizon,
                                      const EstimatorOptions& opts = {});

// ---------------------------------------------------------------------------
// Influence function workspace: iterated-conditional-expectation tables per
// target time s. For target s, tables run j = 1..s+1:
//   outcome_tail[j](h_{j-1})  — expected tail after the interval-j outcome
//                               draw under z_Y (at j = s+1: the terminal
//                               hazard itself)
//   competing_tail[j](h_{j-1}) = (1 - d_haz(j, z_D, h)) * outcome_tail[j]
//   yblock_tail[j](h_{j-2}, ld_{j-1}) — competing_tail integrated over the
//                               Y-block law at j-1 under z_Y
//   dblock_tail[j](h_{j-2}) — yblock_tail integrated over the D-block law at
//                               j-1 under z_D (the ICE recursion value)
// dblock_tail[1] is the scalar contribution of event time s+1 to the risk.
struct IceSlice {
  int s = 0;
  // Index [j] valid for j = 1..s+1 (slot 0 unused).
  std::vector<std::vector<double>> outcome_tail;
  std::vector<std::vector<double>> competing_tail;
  std::vector<std::vector<double>> yblock_tail;
  std::vector<std::vector<double>> dblock_tail;
};

struct IfWorkspace {
  ArmPair arm;
  int horizon = 0;
  const TableLawSet* laws = nullptr;
  std::vector<IceSlice> slices;  // per s = 0..K
};

IceSlice ice_tables(const TableLawSet& laws, ArmPair arm, int s,
                    const EstimatorOptions& opts = {});
IfWorkspace build_if_workspace(const TableLawSet& laws, ArmPair arm,
                               const EstimatorOptions& opts = {});

// Per-record influence contributions by target time s (vector length K+1);
// sum of entries 0..k-1 corrects the horizon-k risk.
std::vector<double> influence_terms(const Trajectory& traj,
                                    const IfWorkspace& ws,
                                    const EstimatorOptions& opts = {});
// Full contribution (sum over s), the per-record influence value.
double influence_contribution(const Trajectory& traj, const IfWorkspace& ws,
                              const EstimatorOptions& opts = {});

EstimateReport one_step_estimate(const TrialDataset& data,
                                 const NuisanceSpec& spec, ArmPair arm,
                                 const EstimatorOptions& opts = {});

// ---------------------------------------------------------------------------
// Population enumeration: all observed-law trajectory classes with their
// probabilities, as pseudo-records usable by every trajectory-level routine.
// Classes that leave the protocol at interval t (censored, or alive but
// non-adherent — indistinguishable to every estimator term, which is
// indicator-guarded on both) are emitted once as censored at t.
struct Population {
  std::vector<Trajectory> trajs;
  std::vector<double> weights;  // probabilities, sum to 1
};

Population enumerate_population(const TableLawSet& laws);

// ---------------------------------------------------------------------------
// Shared low-level entry points for fitted-set reuse in hot loops.
struct EstimatorInputs {
  const std::vector<Trajectory>* trajs = nullptr;
  const std::vector<double>* weights = nullptr;  // may be null (all ones)
  const NuisanceSet* fits = nullptr;
  int horizon = 0;
};

EstimateReport plug_in_from_fits(const EstimatorInputs& in, ArmPair arm,
                                 const EstimatorOptions& opts = {});
EstimateReport weighted_from_fits(const EstimatorInputs& in, ArmPair arm,
                                  char route,
                                  const EstimatorOptions& opts = {});
EstimateReport one_step_from_fits(const EstimatorInputs& in, ArmPair arm,
                                  const EstimatorOptions& opts = {});

}  // namespace sepeff
