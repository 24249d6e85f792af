// Simulation lab: declarative discrete data-generating processes, exact
// ground truth by enumeration, sampler, misspecification scenario, and the
// coverage experiment harness.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepeff/data.hpp"
#include "sepeff/estimators.hpp"
#include "sepeff/laws.hpp"
#include "sepeff/models.hpp"
#include "sepeff/rng.hpp"

namespace sepeff {

// ---------------------------------------------------------------------------
// DgpSpec: each trial variable gets a conditional law keyed by selectors over
// the realized past. Selectors respect the within-interval order
// C_k, R_k, D_k, Y_k, L_k, which also guarantees every law's key is
// determined by the corresponding conditioning set of the identification
// formula (so exported conditionals are exact).
struct Selector {
  enum class Kind {
    Baseline,     // baseline covariate value
    TimeVarying,  // time-varying covariate value at time t
    AY,           // I(outcome component taken at t) = I(Z_Y = R_t)
    AD,           // I(competing component taken at t)
    ZY,
    ZD,
    R,  // adherence indicator at t
  } kind = Kind::Baseline;
  std::string name;  // covariate selectors
  int t = 0;         // time-indexed selectors
  int levels = 2;    // filled during validation
};

struct LawBlock {
  int t = 0;  // -1 = applies to every time not covered explicitly
  std::vector<Selector> key;
  // Bernoulli variables (c, r, d, y): probs[cell] = P(value = 1 | cell).
  std::vector<double> probs;
  // Covariate laws: table[cell] = distribution over outcome levels.
  std::vector<std::vector<double>> table;
};

struct CovariateLaw {
  std::string name;  // must match a schema covariate
  std::vector<LawBlock> blocks;
};

struct DgpSpec {
  std::string name;
  int horizon = 0;  // K+1
  CovariateSchema schema;
  double z_prob = 0.5;  // P(Z=1) two-arm; P(Z_W=1) each component four-arm
  std::vector<CovariateLaw> baseline_laws;      // one per baseline covariate
  std::vector<CovariateLaw> time_varying_laws;  // one per time-varying cov.
  std::vector<LawBlock> c_laws, r_laws, d_laws, y_laws;

  int K() const { return horizon - 1; }
  void validate() const;  // selector availability, cell counts, probabilities

  static DgpSpec from_json_text(const std::string& text);
  static DgpSpec from_json_file(const std::string& path);
  std::string to_json_text() const;
};

enum class SamplingMode { TwoArm, FourArm };

// i.i.d. records in temporal order; deterministic given seed. Four-arm mode
// draws the two components independently; the dataset's z column carries the
// outcome-pathway component and z_d_aux the other (estimators only accept
// two-arm output).
TrialDataset sample_trial(const DgpSpec& dgp, int n, std::uint64_t seed,
                          SamplingMode mode = SamplingMode::TwoArm);

// Exact counterfactual risk under (z_Y, z_D, no censoring, full adherence) by
// direct enumeration of the intervened process. Independent of the estimator
// code paths.
RiskCurve exact_truth(const DgpSpec& dgp, ArmPair arm);

// Observed-data conditional laws implied by the DGP (two-arm mode), for
// feeding the estimator routes directly.
TableLawSet dgp_laws(const DgpSpec& dgp);

// ---------------------------------------------------------------------------
// Random complete laws for identity/property suites: every conditional
// probability drawn uniformly within [margin, 1 - margin].
TableLawSet random_law_set(Rng& rng, const CovariateSchema& schema,
                           int horizon, double margin = 0.05);

// ---------------------------------------------------------------------------
// Misspecification: refit every time-varying covariate law as the marginal
// table over records alive and uncensored at t (conditioning on nothing, not
// even the arm or adherence).
NuisanceSet misspecified_nuisance_set(const TrialDataset& data,
                                      const NuisanceSpec& base_spec,
                                      EstimatorKind kind,
                                      const std::vector<double>& weights = {});

// ---------------------------------------------------------------------------
// Coverage experiment.
struct Scenario {
  DgpSpec dgp;
  NuisanceSpec nuisance;
  bool misspecify_l = false;
  std::vector<EstimatorKind> estimators;
  int n = 1000;
  int replications = 200;
  int bootstrap_draws = 200;
  double level = 0.95;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  static Scenario from_json_text(const std::string& text);
  static Scenario from_json_file(const std::string& path);
};

struct CoverageCell {
  EstimatorKind estimator;
  ArmPair arm;
  double coverage = 0.0;  // over successful replications
  double mc_se = 0.0;
  int successes = 0;  // replications with a usable CI
  int failures = 0;
};

struct ReplicationDetail {
  int replication = 0;
  bool ok = false;
  std::string error;
  // Indexed [estimator][arm] in scenario order: terminal point estimate and
  // percentile interval.
  std::vector<std::vector<double>> point;
  std::vector<std::vector<double>> lower;
  std::vector<std::vector<double>> upper;
};

struct CoverageTable {
  Scenario scenario_echo;  // without the DGP body; for reporting
  std::vector<double> truth;  // terminal truth per arm, scenario arm order
  std::vector<CoverageCell> cells;
  std::vector<ReplicationDetail> details;

  std::string to_csv() const;  // estimator, n, one column per arm
};

CoverageTable run_coverage_experiment(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Bundled specs used by tests and the acceptance gate.
DgpSpec two_period_benchmark_dgp();  // K=1, binary covariate, known truths
DgpSpec long_horizon_benchmark_dgp();  // 30 intervals, 5-level covariate

}  // namespace sepeff
