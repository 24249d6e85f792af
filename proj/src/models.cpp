// Nuisance model fitting: saturated conditional tables and pooled logistic
// regressions over person-intervals, plus the NuisanceSet bundle estimators
// query. Weighted fits are exact duplicated-record fits, which is what makes
// bootstrap-by-weights and population-enumeration runs reproduce plain fits.
#include "sepeff/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sepeff {

using json = nlohmann::json;

const char* model_role_name(ModelRole role) {
  switch (role) {
    case ModelRole::Y:
      return "y";
    case ModelRole::D:
      return "d";
    case ModelRole::CR:
      return "cr";
    case ModelRole::LD:
      return "ld";
    case ModelRole::LY:
      return "ly";
  }
  return "?";
}

ModelRole model_role_from_name(const std::string& name) {
  if (name == "y") return ModelRole::Y;
  if (name == "d") return ModelRole::D;
  if (name == "cr") return ModelRole::CR;
  if (name == "ld") return ModelRole::LD;
  if (name == "ly") return ModelRole::LY;
  throw config_error("unknown model role '" + name + "'");
}

const char* estimator_kind_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::PlugIn:
      return "plug-in";
    case EstimatorKind::WeightedY:
      return "weighted-y";
    case EstimatorKind::WeightedD:
      return "weighted-d";
    case EstimatorKind::OneStep:
      return "one-step";
  }
  return "?";
}

EstimatorKind estimator_kind_from_name(const std::string& name) {
  if (name == "plug-in" || name == "plugin") return EstimatorKind::PlugIn;
  if (name == "weighted-y") return EstimatorKind::WeightedY;
  if (name == "weighted-d") return EstimatorKind::WeightedD;
  if (name == "one-step" || name == "onestep") return EstimatorKind::OneStep;
  throw config_error("unknown estimator kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// Formula terms

std::vector<TermSpec> parse_terms(const std::vector<std::string>& specs,
                                  const CovariateSchema& schema) {
  std::vector<TermSpec> out;
  for (const std::string& spec : specs) {
    TermSpec term;
    if (spec == "time") {
      term.kind = TermSpec::Kind::Time;
    } else if (spec == "time2") {
      term.kind = TermSpec::Kind::Time2;
    } else if (spec == "time3") {
      term.kind = TermSpec::Kind::Time3;
    } else if (spec == "z") {
      term.kind = TermSpec::Kind::Z;
    } else if (spec.rfind("l0:", 0) == 0) {
      term.kind = TermSpec::Kind::Baseline;
      term.name = spec.substr(3);
      if (schema.baseline_index(term.name) < 0)
        throw config_error("term '" + spec + "': unknown baseline covariate");
    } else if (spec.rfind("time*l0:", 0) == 0) {
      term.kind = TermSpec::Kind::TimeBaseline;
      term.name = spec.substr(8);
      if (schema.baseline_index(term.name) < 0)
        throw config_error("term '" + spec + "': unknown baseline covariate");
    } else if (spec.rfind("l:", 0) == 0) {
      term.kind = TermSpec::Kind::LLast;
      std::string body = spec.substr(2);
      auto slash = body.find('/');
      if (slash != std::string::npos) {
        term.name = body.substr(0, slash);
        term.fallback = body.substr(slash + 1);
        if (schema.baseline_index(term.fallback) < 0)
          throw config_error("term '" + spec + "': unknown baseline fallback");
      } else {
        term.name = body;
      }
      if (schema.time_varying_index(term.name) < 0)
        throw config_error("term '" + spec +
                           "': unknown time-varying covariate");
    } else {
      throw config_error("unknown model term '" + spec + "'");
    }
    out.push_back(term);
  }
  return out;
}

namespace {

std::string term_label(const TermSpec& term) {
  switch (term.kind) {
    case TermSpec::Kind::Time:
      return "time";
    case TermSpec::Kind::Time2:
      return "time2";
    case TermSpec::Kind::Time3:
      return "time3";
    case TermSpec::Kind::Z:
      return "z";
    case TermSpec::Kind::Baseline:
      return "l0:" + term.name;
    case TermSpec::Kind::TimeBaseline:
      return "time*l0:" + term.name;
    case TermSpec::Kind::LLast:
      return term.fallback.empty() ? "l:" + term.name
                                   : "l:" + term.name + "/" + term.fallback;
  }
  return "?";
}

// Value of one formula term when modeling interval t under arm value z.
double term_value(const TermSpec& term, const CovariateSchema& schema,
                  const Trajectory& traj, int t, int z) {
  switch (term.kind) {
    case TermSpec::Kind::Time:
      return static_cast<double>(t);
    case TermSpec::Kind::Time2:
      return static_cast<double>(t) * t;
    case TermSpec::Kind::Time3:
      return static_cast<double>(t) * t * t;
    case TermSpec::Kind::Z:
      return static_cast<double>(z);
    case TermSpec::Kind::Baseline: {
      int idx = schema.baseline_index(term.name);
      return traj.baseline[static_cast<size_t>(idx)];
    }
    case TermSpec::Kind::TimeBaseline: {
      int idx = schema.baseline_index(term.name);
      return static_cast<double>(t) * traj.baseline[static_cast<size_t>(idx)];
    }
    case TermSpec::Kind::LLast: {
      // Most recent time-varying value, l_{t-1}; interval 1 falls back to a
      // baseline covariate when configured.
      if (t - 1 >= 1) {
        if (!traj.has_l(t - 1))
          throw fit_error("term '" + term_label(term) +
                          "': covariate absent at interval " +
                          std::to_string(t - 1));
        int idx = schema.time_varying_index(term.name);
        return traj.l_values[static_cast<size_t>(t - 1)]
                            [static_cast<size_t>(idx)];
      }
      if (term.fallback.empty())
        throw config_error("term '" + term_label(term) +
                           "': no baseline fallback for interval 1");
      int idx = schema.baseline_index(term.fallback);
      return traj.baseline[static_cast<size_t>(idx)];
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Risk sets and outcomes per (role, time) on trajectory digests. `submodel`
// distinguishes the sequential censoring ('c') and adherence ('r') factors of
// the CR role; 0 means the composite continuation indicator.

bool in_risk_set(ModelRole role, char submodel, int t, bool require_adh,
                 const Trajectory& traj) {
  switch (role) {
    case ModelRole::Y:
      return traj.first_d > t && traj.first_y >= t && traj.first_c > t &&
             (!require_adh || traj.first_r0 > t);
    case ModelRole::D:
      return traj.first_d >= t && traj.first_y >= t && traj.first_c > t &&
             (!require_adh || traj.first_r0 > t);
    case ModelRole::CR: {
      bool at_risk = traj.first_d >= t && traj.first_y >= t &&
                     traj.first_c >= t &&
                     (!require_adh || traj.first_r0 >= t);
      if (!at_risk) return false;
      if (submodel == 'r') return traj.first_c > t;  // R factor given C_t = 0
      return true;
    }
    case ModelRole::LD:
    case ModelRole::LY:
      if (t == 0) return true;  // baseline law
      return traj.first_d > t && traj.first_y > t && traj.first_c > t &&
             (!require_adh || traj.first_r0 > t) && traj.has_l(t);
  }
  return false;
}

int binary_outcome(ModelRole role, char submodel, int t,
                   const Trajectory& traj) {
  switch (role) {
    case ModelRole::Y:
      return traj.first_y == t ? 1 : 0;
    case ModelRole::D:
      return traj.first_d == t ? 1 : 0;
    case ModelRole::CR:
      if (submodel == 'c') return traj.first_c == t ? 1 : 0;
      if (submodel == 'r') return traj.first_r0 > t ? 1 : 0;
      // composite continuation: uncensored and adherent through t
      return (traj.first_c > t && traj.first_r0 > t) ? 1 : 0;
    default:
      throw config_error("covariate law has no binary outcome");
  }
}

// Full-history conditioning key for a saturated fit.
long long history_code(const HistoryCoder& coder, const Trajectory& traj,
                       int upto) {
  long long h = 0;
  for (int j = 0; j <= upto; ++j) {
    const std::vector<double>& values = traj.l_values[static_cast<size_t>(j)];
    long long cell = coder.cell_code(coder.ld_code(values, j),
                                     coder.ly_code(values, j), j);
    h = coder.extend(h, cell, j);
  }
  return h;
}

long long saturated_key(const HistoryCoder& coder, ModelRole role, int t,
                        bool full_history, const Trajectory& traj) {
  if (!full_history) return 0;  // key collapsed to the marginal
  switch (role) {
    case ModelRole::Y:
    case ModelRole::D:
    case ModelRole::CR:
    case ModelRole::LD:
      return history_code(coder, traj, t - 1);
    case ModelRole::LY: {
      long long h_prev = history_code(coder, traj, t - 1);
      long long ld =
          coder.ld_code(traj.l_values[static_cast<size_t>(t)], t);
      return coder.ly_key(h_prev, ld, t);
    }
  }
  return 0;
}

int table_levels(const HistoryCoder& coder, ModelRole role, int t) {
  switch (role) {
    case ModelRole::LD:
      return static_cast<int>(coder.ld_cells[static_cast<size_t>(t)]);
    case ModelRole::LY:
      return static_cast<int>(coder.ly_cells[static_cast<size_t>(t)]);
    default:
      return 2;
  }
}

int table_value(const HistoryCoder& coder, ModelRole role, char submodel,
                int t, const Trajectory& traj) {
  switch (role) {
    case ModelRole::LD:
      return static_cast<int>(
          coder.ld_code(traj.l_values[static_cast<size_t>(t)], t));
    case ModelRole::LY:
      return static_cast<int>(
          coder.ly_code(traj.l_values[static_cast<size_t>(t)], t));
    default:
      return binary_outcome(role, submodel, t, traj);
  }
}

DiscreteConditionalModel fit_table(const std::vector<Trajectory>& trajs,
                                   const HistoryCoder& coder, ModelRole role,
                                   int time, const ModelFormula& formula,
                                   const std::vector<double>& weights) {
  DiscreteConditionalModel model;
  model.role = role;
  model.time = time;
  model.by_z = formula.strata == ModelFormula::Strata::ByZ;
  model.full_history = formula.key_full_history;
  model.levels = table_levels(coder, role, time);

  for (size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& traj = trajs[i];
    double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    if (!in_risk_set(role, 0, time, formula.require_adherence, traj)) continue;
    long long cell =
        saturated_key(coder, role, time, formula.key_full_history, traj);
    auto key = model.make_key(model.by_z ? traj.z : 0, cell);
    DiscreteConditionalModel::Row& row = model.rows[key];
    if (row.count.empty()) row.count.assign(static_cast<size_t>(model.levels), 0.0);
    int value = table_value(coder, role, 0, time, traj);
    row.count[static_cast<size_t>(value)] += w;
    row.total += w;
  }

  for (auto& [key, row] : model.rows) {
    (void)key;
    row.prob.resize(row.count.size());
    double alpha = formula.laplace_alpha;
    double denom = row.total + alpha * static_cast<double>(row.count.size());
    for (size_t v = 0; v < row.count.size(); ++v)
      row.prob[v] = (row.count[v] + alpha) / denom;
  }
  return model;
}

// ---------------------------------------------------------------------------
// IRLS for the pooled logistic family.

struct PersonInterval {
  int traj = 0;
  int t = 0;
  int y = 0;
  double w = 1.0;
};

PooledLogisticModel::Fit irls(const std::vector<PersonInterval>& rows,
                              const std::vector<Trajectory>& trajs,
                              const CovariateSchema& schema,
                              const std::vector<TermSpec>& terms, int z_fixed,
                              ModelRole role) {
  const int p = static_cast<int>(terms.size()) + 1;
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n), w(n);
  double weight_total = 0.0;
  for (int i = 0; i < n; ++i) {
    const PersonInterval& pi = rows[static_cast<size_t>(i)];
    const Trajectory& traj = trajs[static_cast<size_t>(pi.traj)];
    X(i, 0) = 1.0;
    int z = z_fixed >= 0 ? z_fixed : traj.z;
    for (int j = 0; j < p - 1; ++j)
      X(i, j + 1) =
          term_value(terms[static_cast<size_t>(j)], schema, traj, pi.t, z);
    y(i) = pi.y;
    w(i) = pi.w;
    weight_total += pi.w;
  }
  if (weight_total <= 0.0)
    throw positivity_error(
        std::string("empty risk set for the ") + model_role_name(role) +
        " model; continuation probabilities are not bounded away from zero");
  double outcome_mean = w.dot(y) / weight_total;
  if (outcome_mean == 0.0 || outcome_mean == 1.0)
    throw fit_error(std::string("complete separation in the ") +
                    model_role_name(role) +
                    " model: all outcomes identical on the risk set");

  auto loglik_of = [&](const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      // log(p) and log(1-p) via the numerically stable softplus form
      double e = eta(i);
      double lse = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += w(i) * (y(i) * e - lse);
    }
    return ll;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = loglik_of(beta);
  PooledLogisticModel::Fit fit;
  fit.weight_total = weight_total;

  const double grad_tol = 1e-10;
  const double ridge = 1e-8;
  const double beta_cap = 30.0;
  for (int iter = 1; iter <= 100; ++iter) {
    fit.iterations = iter;
    Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd mu(n), ww(n);
    for (int i = 0; i < n; ++i) {
      double m = 1.0 / (1.0 + std::exp(-eta(i)));
      mu(i) = m;
      ww(i) = w(i) * m * (1.0 - m);
    }
    Eigen::VectorXd grad = X.transpose() * (w.cwiseProduct(y - mu));
    double grad_norm = grad.cwiseAbs().maxCoeff() / weight_total;
    if (grad_norm < grad_tol) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd H = X.transpose() * ww.asDiagonal() * X;
    H.diagonal().array() += ridge;
    Eigen::VectorXd step = H.ldlt().solve(grad);
    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double cand_ll = loglik_of(candidate);
    int halvings = 0;
    while (cand_ll < ll - 1e-12 && halvings < 40) {
      scale *= 0.5;
      candidate = beta + scale * step;
      cand_ll = loglik_of(candidate);
      ++halvings;
    }
    double improvement = cand_ll - ll;
    beta = candidate;
    ll = cand_ll;
    // The likelihood can reach its floating-point optimum while the
    // normalized gradient sits just above the tolerance; accept the stall as
    // convergence when the gradient is already small.
    if (improvement >= 0.0 && improvement < 1e-12 && grad_norm < 1e-6) {
      fit.converged = true;
      break;
    }
    int worst = 0;
    if (beta.cwiseAbs().maxCoeff(&worst) > beta_cap) {
      std::string label =
          worst == 0 ? "intercept"
                     : term_label(terms[static_cast<size_t>(worst - 1)]);
      throw fit_error(std::string("possible complete separation in the ") +
                      model_role_name(role) + " model on term '" + label +
                      "' (diverging coefficient)");
    }
  }
  fit.loglik = ll;
  fit.beta.assign(beta.data(), beta.data() + p);
  if (!fit.converged)
    throw fit_error(std::string("IRLS did not converge for the ") +
                    model_role_name(role) + " model within 100 iterations");
  return fit;
}

PooledLogisticModel fit_logistic_role(const std::vector<Trajectory>& trajs,
                                      const CovariateSchema& schema,
                                      int horizon, ModelRole role,
                                      char submodel,
                                      const ModelFormula& formula,
                                      const std::vector<double>& weights) {
  if (role == ModelRole::LD || role == ModelRole::LY) {
    const auto& defs = schema.time_varying;
    CovariateBlock block =
        role == ModelRole::LD ? CovariateBlock::D : CovariateBlock::Y;
    int count = 0;
    for (const CovariateDef& def : defs)
      if (def.block == block) {
        ++count;
        if (def.kind != CovariateKind::Binary)
          throw config_error(
              "logistic covariate laws support a single binary covariate");
      }
    if (count != 1)
      throw config_error(
          "logistic covariate laws support a single binary covariate");
  }

  PooledLogisticModel model;
  model.role = role;
  model.submodel = submodel;
  model.strata = formula.strata;
  model.terms = formula.terms;
  model.schema = schema;

  // Covariate-law outcome: value of the block's single binary covariate.
  int tv_index = -1;
  if (role == ModelRole::LD || role == ModelRole::LY) {
    CovariateBlock block =
        role == ModelRole::LD ? CovariateBlock::D : CovariateBlock::Y;
    for (size_t j = 0; j < schema.time_varying.size(); ++j)
      if (schema.time_varying[j].block == block) tv_index = static_cast<int>(j);
  }

  bool is_law = role == ModelRole::LD || role == ModelRole::LY;
  int t_lo = 1;  // the baseline law is never modeled with the logistic family
  int t_hi = is_law ? horizon - 1 : horizon;
  auto gather = [&](int z_filter) {
    std::vector<PersonInterval> rows;
    for (size_t i = 0; i < trajs.size(); ++i) {
      const Trajectory& traj = trajs[i];
      if (z_filter >= 0 && traj.z != z_filter) continue;
      double wt = weights.empty() ? 1.0 : weights[i];
      if (wt == 0.0) continue;
      for (int t = t_lo; t <= t_hi; ++t) {
        if (!in_risk_set(role, submodel, t, formula.require_adherence, traj))
          continue;
        int outcome =
            tv_index >= 0
                ? static_cast<int>(
                      traj.l_values[static_cast<size_t>(t)]
                                   [static_cast<size_t>(tv_index)])
                : binary_outcome(role, submodel, t, traj);
        rows.push_back({static_cast<int>(i), t, outcome, wt});
      }
    }
    return rows;
  };

  if (formula.strata == ModelFormula::Strata::ByZ) {
    for (int z = 0; z <= 1; ++z)
      model.fits.push_back(
          irls(gather(z), trajs, schema, model.terms, z, role));
  } else {
    model.fits.push_back(irls(gather(-1), trajs, schema, model.terms, -1, role));
  }
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// NuisanceSpec

NuisanceSpec NuisanceSpec::saturated_default() {
  NuisanceSpec spec;
  for (ModelRole role : {ModelRole::Y, ModelRole::D, ModelRole::CR,
                         ModelRole::LD, ModelRole::LY}) {
    ModelFormula formula;
    formula.role = role;
    spec.formulas[role] = formula;
  }
  return spec;
}

NuisanceSpec NuisanceSpec::from_json_text(const std::string& text,
                                          const CovariateSchema& schema) {
  json root = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded() || !root.is_object())
    throw config_error("model spec: not a JSON object");
  NuisanceSpec spec;
  for (const auto& [key, value] : root.items()) {
    ModelRole role = model_role_from_name(key);
    if (!value.is_object())
      throw config_error("model spec: entry '" + key + "' must be an object");
    ModelFormula formula;
    formula.role = role;
    std::string kind = value.value("kind", "saturated");
    if (kind == "saturated")
      formula.kind = ModelFormula::Kind::Saturated;
    else if (kind == "logistic")
      formula.kind = ModelFormula::Kind::Logistic;
    else
      throw config_error("model spec: unknown kind '" + kind + "'");
    std::string strata = value.value("strata", "by_z");
    if (strata == "by_z")
      formula.strata = ModelFormula::Strata::ByZ;
    else if (strata == "pooled")
      formula.strata = ModelFormula::Strata::Pooled;
    else
      throw config_error("model spec: unknown strata '" + strata + "'");
    if (value.contains("terms")) {
      std::vector<std::string> specs;
      for (const auto& item : value.at("terms"))
        specs.push_back(item.get<std::string>());
      formula.terms = parse_terms(specs, schema);
    }
    formula.key_full_history = value.value("key_full_history", true);
    formula.require_adherence = value.value("require_adherence", true);
    formula.laplace_alpha = value.value("laplace_alpha", 0.0);
    formula.cr_joint = value.value("cr_joint", false);
    spec.formulas[role] = formula;
  }
  return spec;
}

NuisanceSpec NuisanceSpec::from_json_file(const std::string& path,
                                          const CovariateSchema& schema) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open model spec file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), schema);
}

// ---------------------------------------------------------------------------
// Fitting entry points

PooledLogisticModel fit_pooled_logistic(const TrialDataset& data,
                                        const ModelFormula& formula,
                                        const std::vector<double>& weights) {
  // Standalone CR fits model the composite continuation indicator; the
  // sequential censoring-adherence product lives in fit_nuisance_set.
  auto trajs = make_trajectories(data);
  return fit_logistic_role(trajs, data.schema, data.horizon, formula.role, 0,
                           formula, weights);
}

DiscreteConditionalModel fit_discrete_conditional(
    const TrialDataset& data, ModelRole role, int time,
    const ModelFormula& formula, const std::vector<double>& weights) {
  if (!data.schema.all_discrete())
    throw config_error("saturated tables require discrete covariates");
  auto trajs = make_trajectories(data);
  HistoryCoder coder = HistoryCoder::build(data.schema, data.K());
  return fit_table(trajs, coder, role, time, formula, weights);
}

const FittedRole& NuisanceSet::role(ModelRole r) const {
  switch (r) {
    case ModelRole::Y:
      return y;
    case ModelRole::D:
      return d;
    case ModelRole::CR:
      return cr;
    case ModelRole::LD:
      return ld;
    case ModelRole::LY:
      return ly;
  }
  return y;
}

FittedRole& NuisanceSet::role(ModelRole r) {
  return const_cast<FittedRole&>(
      static_cast<const NuisanceSet*>(this)->role(r));
}

namespace {

std::vector<ModelRole> required_roles(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::WeightedY:
      return {ModelRole::Y, ModelRole::LY, ModelRole::CR};
    case EstimatorKind::WeightedD:
      return {ModelRole::D, ModelRole::LD, ModelRole::CR};
    case EstimatorKind::PlugIn:
    case EstimatorKind::OneStep:
      return {ModelRole::Y, ModelRole::D, ModelRole::CR, ModelRole::LD,
              ModelRole::LY};
  }
  return {};
}

// A covariate-law role is degenerate when its block has no covariates at
// baseline or follow-up: the law is a point mass and queries return 1.
bool law_degenerate(const CovariateSchema& schema, ModelRole role) {
  CovariateBlock block =
      role == ModelRole::LD ? CovariateBlock::D : CovariateBlock::Y;
  for (const CovariateDef& def : schema.baseline)
    if (def.block == block) return false;
  for (const CovariateDef& def : schema.time_varying)
    if (def.block == block) return false;
  return true;
}

}  // namespace

NuisanceSet fit_nuisance_set(const std::vector<Trajectory>& trajs,
                             const CovariateSchema& schema, int horizon,
                             const NuisanceSpec& spec, EstimatorKind kind,
                             const std::vector<double>& weights) {
  NuisanceSet out;
  out.schema = schema;
  out.horizon = horizon;

  for (ModelRole role : required_roles(kind))
    if (!spec.has(role))
      throw config_error(std::string("estimator '") +
                         estimator_kind_name(kind) + "' requires a model for "
                         "role '" + model_role_name(role) + "'");

  double wz = 0.0, wtotal = 0.0;
  for (size_t i = 0; i < trajs.size(); ++i) {
    double w = weights.empty() ? 1.0 : weights[i];
    wz += w * trajs[i].z;
    wtotal += w;
  }
  if (wtotal <= 0.0) throw positivity_error("dataset has zero total weight");
  out.pz1 = wz / wtotal;

  bool any_saturated = false;
  for (const auto& [role, formula] : spec.formulas)
    if (formula.kind == ModelFormula::Kind::Saturated) any_saturated = true;
  if (any_saturated) {
    out.coder = HistoryCoder::build(schema, horizon - 1);
    out.has_coder = true;
  }

  for (const auto& [role_id, formula] : spec.formulas) {
    FittedRole& slot = out.role(role_id);
    slot.present = true;
    slot.formula = formula;
    bool is_law = role_id == ModelRole::LD || role_id == ModelRole::LY;
    if (is_law && law_degenerate(schema, role_id)) {
      slot.degenerate = true;
      continue;
    }
    if (formula.kind == ModelFormula::Kind::Saturated) {
      if (!out.has_coder)
        throw config_error("saturated tables require discrete covariates");
      int t_lo = is_law ? 0 : 1;
      int t_hi = is_law ? horizon - 1 : horizon;
      for (int t = t_lo; t <= t_hi; ++t)
        slot.tables.push_back(
            fit_table(trajs, out.coder, role_id, t, formula, weights));
    } else if (role_id == ModelRole::CR && !formula.cr_joint) {
      slot.logits.push_back(fit_logistic_role(trajs, schema, horizon, role_id,
                                              'c', formula, weights));
      slot.logits.push_back(fit_logistic_role(trajs, schema, horizon, role_id,
                                              'r', formula, weights));
    } else {
      char submodel = role_id == ModelRole::CR ? 'j' : 0;
      slot.logits.push_back(fit_logistic_role(trajs, schema, horizon, role_id,
                                              submodel, formula, weights));
    }
  }
  return out;
}

NuisanceSet fit_nuisance_set(const TrialDataset& data, const NuisanceSpec& spec,
                             EstimatorKind kind,
                             const std::vector<double>& weights) {
  return fit_nuisance_set(make_trajectories(data), data.schema, data.horizon,
                          spec, kind, weights);
}

// ---------------------------------------------------------------------------
// Prediction

double predict(const DiscreteConditionalModel& model, const HistoryCoder& coder,
               const Trajectory& traj, int t, int z, int value) {
  long long cell = saturated_key(coder, model.role, t, model.full_history, traj);
  const DiscreteConditionalModel::Row* row = model.find(model.by_z ? z : 0, cell);
  if (row == nullptr)
    throw positivity_error(
        std::string("no observations for the ") + model_role_name(model.role) +
        " model at interval " + std::to_string(t) + ", arm " +
        std::to_string(z) + ", history cell " + std::to_string(cell));
  return row->prob[static_cast<size_t>(value)];
}

double predict(const PooledLogisticModel& model, const Trajectory& traj, int t,
               int z, int value) {
  const PooledLogisticModel::Fit& fit = model.fit_for(z);
  double eta = fit.beta[0];
  for (size_t j = 0; j < model.terms.size(); ++j)
    eta += fit.beta[j + 1] * term_value(model.terms[j], model.schema, traj, t, z);
  double p = 1.0 / (1.0 + std::exp(-eta));
  return value == 1 ? p : 1.0 - p;
}

namespace {

double query_role(const NuisanceSet& set, ModelRole role_id, int t, int z,
                  const Trajectory& traj, int value) {
  const FittedRole& slot = set.role(role_id);
  if (!slot.present)
    throw config_error(std::string("no fitted model for role '") +
                       model_role_name(role_id) + "'");
  if (slot.formula.kind == ModelFormula::Kind::Saturated) {
    bool is_law = role_id == ModelRole::LD || role_id == ModelRole::LY;
    int t_lo = is_law ? 0 : 1;
    return predict(slot.tables[static_cast<size_t>(t - t_lo)], set.coder, traj,
                   t, z, value);
  }
  // Logistic covariate laws cover follow-up intervals only; the baseline law
  // is left unmodeled and contributes equal factors to every arm.
  if (t == 0) return 1.0;
  return predict(slot.logits[0], traj, t, z, value);
}

}  // namespace

double NuisanceSet::y_hazard(int t, int z, const Trajectory& traj) const {
  return query_role(*this, ModelRole::Y, t, z, traj, 1);
}

double NuisanceSet::d_hazard(int t, int z, const Trajectory& traj) const {
  return query_role(*this, ModelRole::D, t, z, traj, 1);
}

double NuisanceSet::cr_prob(int t, int z, const Trajectory& traj) const {
  const FittedRole& slot = cr;
  if (!slot.present)
    throw config_error("no fitted model for role 'cr'");
  if (slot.formula.kind == ModelFormula::Kind::Saturated)
    return predict(slot.tables[static_cast<size_t>(t - 1)], coder, traj, t, z,
                   1);
  if (!slot.formula.cr_joint && slot.logits.size() == 2) {
    double pc1 = predict(slot.logits[0], traj, t, z, 1);
    double pr1 = predict(slot.logits[1], traj, t, z, 1);
    return (1.0 - pc1) * pr1;
  }
  return predict(slot.logits[0], traj, t, z, 1);
}

namespace {

// Realized value of a block's single covariate when no history coder exists
// (logistic covariate laws, validated at fit time to have one binary member).
int single_block_value(const CovariateSchema& schema, CovariateBlock block,
                       const std::vector<double>& values) {
  for (size_t j = 0; j < schema.time_varying.size(); ++j)
    if (schema.time_varying[j].block == block)
      return static_cast<int>(values[j]);
  throw config_error("covariate block has no members");
}

}  // namespace

double NuisanceSet::ld_prob(int t, int z, const Trajectory& traj) const {
  if (ld.degenerate) return 1.0;
  if (t == 0 && ld.formula.kind == ModelFormula::Kind::Logistic) return 1.0;
  const std::vector<double>& values = traj.l_values[static_cast<size_t>(t)];
  int value = has_coder ? static_cast<int>(coder.ld_code(values, t))
                        : single_block_value(schema, CovariateBlock::D, values);
  return query_role(*this, ModelRole::LD, t, z, traj, value);
}

double NuisanceSet::ly_prob(int t, int z, const Trajectory& traj) const {
  if (ly.degenerate) return 1.0;
  if (t == 0 && ly.formula.kind == ModelFormula::Kind::Logistic) return 1.0;
  const std::vector<double>& values = traj.l_values[static_cast<size_t>(t)];
  int value = has_coder ? static_cast<int>(coder.ly_code(values, t))
                        : single_block_value(schema, CovariateBlock::Y, values);
  return query_role(*this, ModelRole::LY, t, z, traj, value);
}

// ---------------------------------------------------------------------------
// JSON export

std::string NuisanceSet::to_json_text() const {
  json root;
  root["horizon"] = horizon;
  root["pz1"] = pz1;
  root["schema"] = json::parse(schema_to_json_text(schema));
  json roles = json::object();
  for (ModelRole role_id : {ModelRole::Y, ModelRole::D, ModelRole::CR,
                            ModelRole::LD, ModelRole::LY}) {
    const FittedRole& slot = role(role_id);
    if (!slot.present) continue;
    json entry;
    entry["kind"] = slot.formula.kind == ModelFormula::Kind::Saturated
                        ? "saturated"
                        : "logistic";
    entry["strata"] = slot.formula.strata == ModelFormula::Strata::ByZ
                          ? "by_z"
                          : "pooled";
    entry["degenerate"] = slot.degenerate;
    if (!slot.tables.empty()) {
      json tables = json::array();
      for (const DiscreteConditionalModel& table : slot.tables) {
        json tj;
        tj["time"] = table.time;
        tj["levels"] = table.levels;
        std::vector<std::uint64_t> keys;
        keys.reserve(table.rows.size());
        for (const auto& [key, row] : table.rows) {
          (void)row;
          keys.push_back(key);
        }
        std::sort(keys.begin(), keys.end());
        json rows = json::array();
        for (std::uint64_t key : keys) {
          const auto& row = table.rows.at(key);
          json rj;
          if (table.by_z) {
            rj["z"] = static_cast<int>(key & 1u);
            rj["cell"] = static_cast<long long>(key >> 1);
          } else {
            rj["cell"] = static_cast<long long>(key);
          }
          rj["prob"] = row.prob;
          rj["count"] = row.count;
          rows.push_back(rj);
        }
        tj["rows"] = rows;
        tables.push_back(tj);
      }
      entry["tables"] = tables;
    }
    if (!slot.logits.empty()) {
      json logits = json::array();
      for (const PooledLogisticModel& logit : slot.logits) {
        json lj;
        if (logit.submodel != 0)
          lj["submodel"] = std::string(1, logit.submodel);
        std::vector<std::string> labels;
        for (const TermSpec& term : logit.terms)
          labels.push_back(term_label(term));
        lj["terms"] = labels;
        json fits = json::array();
        for (const PooledLogisticModel::Fit& fit : logit.fits) {
          json fj;
          fj["beta"] = fit.beta;
          fj["iterations"] = fit.iterations;
          fj["converged"] = fit.converged;
          fj["loglik"] = fit.loglik;
          fits.push_back(fj);
        }
        lj["fits"] = fits;
        logits.push_back(lj);
      }
      entry["logits"] = logits;
    }
    roles[model_role_name(role_id)] = entry;
  }
  root["roles"] = roles;
  return root.dump(2);
}

}  // namespace sepeff
