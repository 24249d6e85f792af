// Nuisance models: discrete-time hazards for Y and D, the joint
// (C = 0, R = 1) continuation propensity, and conditional laws for the two
// time-varying covariate blocks.
//
// Two model families:
//   * saturated conditional tables (multinomial MLE per history cell), the
//     workhorse for discrete low-cardinality settings and for every exactness
//     test, and
//   * pooled logistic regressions over person-intervals (IRLS), used by the
//     weighted estimators when histories are long or continuous.
//
// Risk sets follow the identification formula's conditioning events: every
// model at interval t conditions on being uncensored, adherent (unless
// explicitly marginalized), and event-free as appropriate for its role.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "sepeff/data.hpp"
#include "sepeff/histories.hpp"

namespace sepeff {

enum class ModelRole { Y, D, CR, LD, LY };
const char* model_role_name(ModelRole role);
ModelRole model_role_from_name(const std::string& name);

enum class EstimatorKind { PlugIn, WeightedY, WeightedD, OneStep };
const char* estimator_kind_name(EstimatorKind kind);
EstimatorKind estimator_kind_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Formula terms for the logistic family. The intercept is implicit. `LLast`
// is the most recent time-varying covariate value (l_{t-1} when modeling
// interval t); at the first interval it falls back to a named baseline
// covariate when one is configured.
struct TermSpec {
  enum class Kind {
    Time,
    Time2,
    Time3,
    LLast,
    Baseline,
    TimeBaseline,  // interval index times a baseline covariate
    Z
  } kind = Kind::Time;
  std::string name;      // covariate name for LLast/Baseline/TimeBaseline
  std::string fallback;  // baseline fallback for LLast at interval 1
};

std::vector<TermSpec> parse_terms(const std::vector<std::string>& specs,
                                  const CovariateSchema& schema);

struct ModelFormula {
  ModelRole role = ModelRole::Y;
  enum class Kind { Saturated, Logistic } kind = Kind::Saturated;
  // ByZ: one fit per arm; Pooled: single fit (add a `z` term to keep Z as a
  // predictor, or omit it to marginalize over arms).
  enum class Strata { ByZ, Pooled } strata = Strata::ByZ;

  std::vector<TermSpec> terms;  // logistic only

  // Saturated-table options.
  bool key_full_history = true;   // condition on the covariate history
  bool require_adherence = true;  // condition on Rbar = 1 in the risk set
  double laplace_alpha = 0.0;     // 0 = hard error on empty cells

  // CR only: fit a single joint logistic for P(C=0, R=1 | .) instead of the
  // default product of sequential C and R factors.
  bool cr_joint = false;
};

// Per-role formulas for one estimation run.
struct NuisanceSpec {
  std::map<ModelRole, ModelFormula> formulas;

  bool has(ModelRole role) const { return formulas.count(role) > 0; }
  static NuisanceSpec saturated_default();  // all five roles, by-arm tables
  static NuisanceSpec from_json_text(const std::string& text,
                                     const CovariateSchema& schema);
  static NuisanceSpec from_json_file(const std::string& path,
                                     const CovariateSchema& schema);
};

// ---------------------------------------------------------------------------
// Saturated conditional table for one (role, time).
struct DiscreteConditionalModel {
  ModelRole role = ModelRole::LD;
  int time = 0;
  int levels = 2;        // outcome levels (2 for event flags)
  bool by_z = true;
  bool full_history = true;

  struct Row {
    std::vector<double> prob;
    std::vector<double> count;  // weighted counts
    double total = 0.0;
  };
  // Key packs (z, conditioning cell); see make_key.
  std::unordered_map<std::uint64_t, Row> rows;

  std::uint64_t make_key(int z, long long cell) const {
    std::uint64_t c = static_cast<std::uint64_t>(cell);
    return by_z ? (c << 1) | static_cast<unsigned>(z) : c;
  }
  const Row* find(int z, long long cell) const {
    auto it = rows.find(make_key(z, cell));
    return it == rows.end() ? nullptr : &it->second;
  }
};

// ---------------------------------------------------------------------------
// Pooled logistic regression over person-intervals.
struct PooledLogisticModel {
  ModelRole role = ModelRole::Y;
  char submodel = 0;  // 'c' or 'r' when part of the CR product, else 0
  ModelFormula::Strata strata = ModelFormula::Strata::ByZ;
  std::vector<TermSpec> terms;
  CovariateSchema schema;  // term lookup at prediction time

  struct Fit {
    std::vector<double> beta;  // [intercept, terms...]
    int iterations = 0;
    bool converged = false;
    double loglik = 0.0;
    double weight_total = 0.0;
  };
  std::vector<Fit> fits;  // index z for ByZ; single entry for Pooled

  const Fit& fit_for(int z) const {
    return strata == ModelFormula::Strata::ByZ ? fits[z] : fits[0];
  }
};

// ---------------------------------------------------------------------------
// Fitted bundle.
struct FittedRole {
  bool present = false;
  bool degenerate = false;  // role not needed (e.g. empty Y-block)
  ModelFormula formula;
  std::vector<DiscreteConditionalModel> tables;  // per time when saturated
  std::vector<PooledLogisticModel> logits;       // [model] or [C, R]
};

struct NuisanceSet {
  CovariateSchema schema;
  int horizon = 0;
  double pz1 = 0.5;  // fitted P(Z = 1)
  // History coder for table lookups; built whenever any role is saturated.
  bool has_coder = false;
  HistoryCoder coder;
  FittedRole y, d, cr, ld, ly;

  const FittedRole& role(ModelRole r) const;
  FittedRole& role(ModelRole r);
  double pz(int z) const { return z == 1 ? pz1 : 1.0 - pz1; }

  // Probability queries against a record context. `t` is the interval being
  // modeled (hazards/CR: 1..K+1; covariate laws: 0..K); `z` the arm value the
  // prediction is requested under. Throws positivity_error on unseen table
  // cells.
  double y_hazard(int t, int z, const Trajectory& traj) const;
  double d_hazard(int t, int z, const Trajectory& traj) const;
  double cr_prob(int t, int z, const Trajectory& traj) const;
  double ld_prob(int t, int z, const Trajectory& traj) const;  // at realized l
  double ly_prob(int t, int z, const Trajectory& traj) const;

  std::string to_json_text() const;
};

// ---------------------------------------------------------------------------
// Fitting. All fits accept per-individual weights (empty = all ones);
// weighted fits are exactly the fits on data with duplicated records, which
// is what makes bootstrap-by-weights and population-enumeration runs exact.

PooledLogisticModel fit_pooled_logistic(const TrialDataset& data,
                                        const ModelFormula& formula,
                                        const std::vector<double>& weights = {});

DiscreteConditionalModel fit_discrete_conditional(
    const TrialDataset& data, ModelRole role, int time,
    const ModelFormula& formula, const std::vector<double>& weights = {});

NuisanceSet fit_nuisance_set(const TrialDataset& data, const NuisanceSpec& spec,
                             EstimatorKind kind,
                             const std::vector<double>& weights = {});

// Trajectory-level variants used by hot loops (coverage, bootstrap) so the
// digests are built once per dataset.
NuisanceSet fit_nuisance_set(const std::vector<Trajectory>& trajs,
                             const CovariateSchema& schema, int horizon,
                             const NuisanceSpec& spec, EstimatorKind kind,
                             const std::vector<double>& weights = {});

// Probability of `value` for the modeled variable at interval `t` under arm
// value `z` given the record's covariate history.
double predict(const DiscreteConditionalModel& model, const HistoryCoder& coder,
               const Trajectory& traj, int t, int z, int value);
double predict(const PooledLogisticModel& model, const Trajectory& traj, int t,
               int z, int value);

}  // namespace sepeff
