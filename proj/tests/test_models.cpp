// Nuisance-model tests: IRLS logistic recovery against known coefficients,
// saturated-fit = empirical-frequency identities, weighted fits versus
// duplicated records, risk-set conditioning, and spec plumbing.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "sepeff/models.hpp"
#include "sepeff/rng.hpp"

using namespace sepeff;

namespace {

CovariateSchema baseline_only_schema() {
  CovariateSchema schema;
  schema.baseline.push_back({"x", CovariateKind::Binary, 2, CovariateBlock::D});
  return schema;
}

// One-interval record with no censoring, full adherence, no competing event.
IndividualRecord clean_record(const std::string& id, int z, double l0, int y) {
  IndividualRecord rec;
  rec.id = id;
  rec.z = z;
  rec.baseline = {l0};
  IntervalEntry e;
  e.c = 0;
  e.r = 1;
  e.d = 0;
  e.y = static_cast<std::int8_t>(y);
  rec.intervals.push_back(e);
  return rec;
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Trajectory context_traj(int z, std::vector<double> baseline, int horizon) {
  Trajectory traj;
  traj.z = z;
  traj.horizon = horizon;
  traj.first_c = traj.first_r0 = traj.first_d = traj.first_y = horizon + 1;
  traj.baseline = baseline;
  traj.l_values.assign(static_cast<size_t>(horizon), {});
  traj.l_values[0] = std::move(baseline);
  return traj;
}

}  // namespace

TEST_CASE("term parsing validates names and kinds") {
  CovariateSchema schema;
  schema.baseline.push_back({"age", CovariateKind::Binary, 2, CovariateBlock::D});
  schema.time_varying.push_back({"bp", CovariateKind::Binary, 2, CovariateBlock::D});

  auto terms = parse_terms({"time", "time2", "time3", "z", "l0:age",
                            "time*l0:age", "l:bp/age", "l:bp"},
                           schema);
  CHECK(terms.size() == 8);
  CHECK(terms[0].kind == TermSpec::Kind::Time);
  CHECK(terms[4].kind == TermSpec::Kind::Baseline);
  CHECK(terms[5].kind == TermSpec::Kind::TimeBaseline);
  CHECK(terms[6].fallback == "age");

  CHECK_THROWS_AS(parse_terms({"l0:missing"}, schema), config_error);
  CHECK_THROWS_AS(parse_terms({"l:missing"}, schema), config_error);
  CHECK_THROWS_AS(parse_terms({"l:bp/missing"}, schema), config_error);
  CHECK_THROWS_AS(parse_terms({"banana"}, schema), config_error);
}

TEST_CASE("pooled logistic recovers a known hazard within three SEs") {
  TrialDataset data;
  data.schema = baseline_only_schema();
  data.horizon = 1;
  const double b0 = -1.0, b_l = 0.8, b_z = -0.5;
  Rng rng(20260814, 1);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    int z = rng.bernoulli(0.5) ? 1 : 0;
    double l0 = rng.bernoulli(0.6) ? 1.0 : 0.0;
    double p = expit(b0 + b_l * l0 + b_z * z);
    int y = rng.bernoulli(p) ? 1 : 0;
    data.individuals.push_back(clean_record("i" + std::to_string(i), z, l0, y));
  }

  ModelFormula formula;
  formula.role = ModelRole::Y;
  formula.kind = ModelFormula::Kind::Logistic;
  formula.strata = ModelFormula::Strata::Pooled;
  formula.terms = parse_terms({"l0:x", "z"}, data.schema);
  PooledLogisticModel model = fit_pooled_logistic(data, formula);
  REQUIRE(model.fits.size() == 1);
  const auto& fit = model.fits[0];
  CHECK(fit.converged);
  REQUIRE(fit.beta.size() == 3);

  // Observed-information standard errors at the fitted coefficients.
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (const auto& rec : data.individuals) {
    Eigen::Vector3d x(1.0, rec.baseline[0], static_cast<double>(rec.z));
    double eta = fit.beta[0] * x(0) + fit.beta[1] * x(1) + fit.beta[2] * x(2);
    double mu = expit(eta);
    H += mu * (1.0 - mu) * x * x.transpose();
  }
  Eigen::Matrix3d cov = H.inverse();
  std::vector<double> truth = {b0, b_l, b_z};
  for (int j = 0; j < 3; ++j) {
    double se = std::sqrt(cov(j, j));
    CHECK(std::abs(fit.beta[static_cast<size_t>(j)] - truth[static_cast<size_t>(j)]) <=
          3.0 * se);
  }
}

TEST_CASE("degenerate outcomes raise a separation error") {
  TrialDataset data;
  data.schema = baseline_only_schema();
  data.horizon = 1;
  for (int i = 0; i < 50; ++i)
    data.individuals.push_back(
        clean_record("i" + std::to_string(i), i % 2, i % 3 == 0 ? 1.0 : 0.0, 0));

  ModelFormula formula;
  formula.role = ModelRole::Y;
  formula.kind = ModelFormula::Kind::Logistic;
  formula.strata = ModelFormula::Strata::Pooled;
  CHECK_THROWS_AS(fit_pooled_logistic(data, formula), fit_error);
}

TEST_CASE("empty risk set raises a positivity error") {
  TrialDataset data;
  data.schema = baseline_only_schema();
  data.horizon = 1;
  for (int i = 0; i < 10; ++i) {
    IndividualRecord rec;
    rec.id = "i" + std::to_string(i);
    rec.z = i % 2;
    rec.baseline = {0.0};
    IntervalEntry e;
    e.c = 1;  // everyone censored at the first interval
    rec.intervals.push_back(e);
    data.individuals.push_back(rec);
  }
  ModelFormula formula;
  formula.role = ModelRole::Y;
  formula.kind = ModelFormula::Kind::Logistic;
  formula.strata = ModelFormula::Strata::Pooled;
  CHECK_THROWS_AS(fit_pooled_logistic(data, formula), positivity_error);
}

TEST_CASE("saturated logistic formula equals stratified proportions") {
  // Two intervals, binary baseline, no time-varying covariates. The design
  // {1, t, l0, t*l0} per arm spans the four (t, l0) cells, so fitted
  // probabilities must equal the cellwise empirical event proportions.
  CovariateSchema schema = baseline_only_schema();
  TrialDataset data;
  data.schema = schema;
  data.horizon = 2;
  Rng rng(77, 4);
  auto hazard = [](int z, int t, double l0) {
    return 0.10 + 0.15 * z + 0.18 * (t == 2) + 0.22 * l0;
  };
  for (int i = 0; i < 8000; ++i) {
    int z = rng.bernoulli(0.5) ? 1 : 0;
    double l0 = rng.bernoulli(0.5) ? 1.0 : 0.0;
    IndividualRecord rec;
    rec.id = "i" + std::to_string(i);
    rec.z = z;
    rec.baseline = {l0};
    IntervalEntry e1;
    e1.c = 0;
    e1.r = 1;
    e1.d = 0;
    e1.y = rng.bernoulli(hazard(z, 1, l0)) ? 1 : 0;
    rec.intervals.push_back(e1);
    IntervalEntry e2;
    if (e1.y == 0) {
      e2.c = 0;
      e2.r = 1;
      e2.d = 0;
      e2.y = rng.bernoulli(hazard(z, 2, l0)) ? 1 : 0;
    }
    rec.intervals.push_back(e2);
    data.individuals.push_back(rec);
  }

  ModelFormula formula;
  formula.role = ModelRole::Y;
  formula.kind = ModelFormula::Kind::Logistic;
  formula.strata = ModelFormula::Strata::ByZ;
  formula.terms = parse_terms({"time", "l0:x", "time*l0:x"}, schema);
  PooledLogisticModel model = fit_pooled_logistic(data, formula);

  for (int z = 0; z <= 1; ++z)
    for (int t = 1; t <= 2; ++t)
      for (int l0 = 0; l0 <= 1; ++l0) {
        double events = 0.0, at_risk = 0.0;
        for (const auto& rec : data.individuals) {
          if (rec.z != z || rec.baseline[0] != l0) continue;
          if (t == 2 && rec.intervals[0].y != 0) continue;
          at_risk += 1.0;
          events += rec.intervals[static_cast<size_t>(t - 1)].y == 1 ? 1.0 : 0.0;
        }
        REQUIRE(at_risk > 0.0);
        Trajectory traj = context_traj(z, {static_cast<double>(l0)}, 2);
        double fitted = predict(model, traj, t, z, 1);
        CHECK(std::abs(fitted - events / at_risk) < 1e-8);
      }
}

TEST_CASE("intercept-only logistic with zero coefficient predicts one half") {
  PooledLogisticModel model;
  model.strata = ModelFormula::Strata::Pooled;
  model.fits.push_back({{0.0}, 1, true, 0.0, 1.0});
  Trajectory traj = context_traj(0, {}, 1);
  CHECK(predict(model, traj, 1, 0, 1) == doctest::Approx(0.5));
}

TEST_CASE("table lookup returns the requested level") {
  CovariateSchema schema = baseline_only_schema();
  DiscreteConditionalModel model;
  model.role = ModelRole::LD;
  model.time = 0;
  model.levels = 2;
  model.by_z = true;
  DiscreteConditionalModel::Row row;
  row.prob = {0.3, 0.7};
  row.count = {3, 7};
  row.total = 10;
  model.rows[model.make_key(1, 0)] = row;

  HistoryCoder coder = HistoryCoder::build(schema, 0);
  Trajectory traj = context_traj(1, {1.0}, 1);
  CHECK(predict(model, coder, traj, 0, 1, 1) == doctest::Approx(0.7));
  CHECK(predict(model, coder, traj, 0, 1, 0) == doctest::Approx(0.3));
  CHECK_THROWS_AS(predict(model, coder, traj, 0, 0, 1), positivity_error);
}

namespace {

// Small synthetic trial with censoring, deviation, competing events, and one
// binary time-varying covariate in each block.
TrialDataset synthetic_trial(int n, unsigned seed) {
  CovariateSchema schema;
  schema.baseline.push_back({"x", CovariateKind::Binary, 2, CovariateBlock::D});
  schema.time_varying.push_back({"ld", CovariateKind::Binary, 2, CovariateBlock::D});
  schema.time_varying.push_back({"ly", CovariateKind::Binary, 2, CovariateBlock::Y});
  TrialDataset data;
  data.schema = schema;
  data.horizon = 2;
  Rng rng(seed, 11);
  for (int i = 0; i < n; ++i) {
    int z = rng.bernoulli(0.5) ? 1 : 0;
    double l0 = rng.bernoulli(0.5) ? 1.0 : 0.0;
    IndividualRecord rec;
    rec.id = "i" + std::to_string(i);
    rec.z = z;
    rec.baseline = {l0};
    bool absorbed = false;
    bool off_frame = false;
    double ld_prev = l0, ly_prev = 0.0;
    for (int t = 1; t <= 2; ++t) {
      IntervalEntry e;
      if (absorbed || off_frame) {
        rec.intervals.push_back(e);
        continue;
      }
      if (rng.bernoulli(0.05)) {  // censored
        e.c = 1;
        off_frame = true;
        rec.intervals.push_back(e);
        continue;
      }
      e.c = 0;
      e.r = rng.bernoulli(0.85) ? 1 : 0;
      e.d = rng.bernoulli(0.08 + 0.05 * ld_prev) ? 1 : 0;
      if (e.d == 1) {
        absorbed = true;
        rec.intervals.push_back(e);
        continue;
      }
      e.y = rng.bernoulli(0.15 + 0.1 * z + 0.1 * ly_prev) ? 1 : 0;
      if (e.y == 1) {
        absorbed = true;
        rec.intervals.push_back(e);
        continue;
      }
      if (t <= 1) {
        double ld = rng.bernoulli(0.3 + 0.3 * l0) ? 1.0 : 0.0;
        double ly = rng.bernoulli(0.4 + 0.2 * ld) ? 1.0 : 0.0;
        e.l = {ld, ly};
        ld_prev = ld;
        ly_prev = ly;
      }
      rec.intervals.push_back(e);
    }
    data.individuals.push_back(rec);
  }
  return data;
}

}  // namespace

TEST_CASE("saturated fits reproduce in-sample cell means") {
  TrialDataset data = synthetic_trial(3000, 91);
  require_valid(data);
  NuisanceSet set = fit_nuisance_set(data, NuisanceSpec::saturated_default(),
                                     EstimatorKind::OneStep);
  auto trajs = make_trajectories(data);

  // For every individual in the Y risk set at t the fitted hazard must equal
  // the empirical event proportion of its (z, history) cell.
  for (int t = 1; t <= 2; ++t) {
    for (const Trajectory& traj : trajs) {
      if (!(traj.first_d > t && traj.first_y >= t && traj.first_c > t &&
            traj.first_r0 > t))
        continue;
      double events = 0.0, at_risk = 0.0;
      for (const Trajectory& other : trajs) {
        if (other.z != traj.z) continue;
        if (!(other.first_d > t && other.first_y >= t && other.first_c > t &&
              other.first_r0 > t))
          continue;
        bool same_history = other.baseline == traj.baseline;
        for (int j = 1; j < t && same_history; ++j)
          same_history = other.l_values[static_cast<size_t>(j)] ==
                         traj.l_values[static_cast<size_t>(j)];
        if (!same_history) continue;
        at_risk += 1.0;
        if (other.first_y == t) events += 1.0;
      }
      CHECK(set.y_hazard(t, traj.z, traj) ==
            doctest::Approx(events / at_risk).epsilon(1e-12));
    }
  }
}

TEST_CASE("weighted fits equal fits on duplicated records") {
  TrialDataset data = synthetic_trial(400, 17);
  std::vector<double> weights;
  TrialDataset duplicated;
  duplicated.schema = data.schema;
  duplicated.horizon = data.horizon;
  Rng rng(5, 5);
  for (const auto& rec : data.individuals) {
    int w = 1 + static_cast<int>(rng.below(3));
    weights.push_back(static_cast<double>(w));
    for (int copy = 0; copy < w; ++copy) duplicated.individuals.push_back(rec);
  }

  NuisanceSet weighted = fit_nuisance_set(
      data, NuisanceSpec::saturated_default(), EstimatorKind::OneStep, weights);
  NuisanceSet plain = fit_nuisance_set(
      duplicated, NuisanceSpec::saturated_default(), EstimatorKind::OneStep);
  CHECK(weighted.pz1 == doctest::Approx(plain.pz1).epsilon(1e-12));

  auto trajs = make_trajectories(data);
  for (const Trajectory& traj : trajs) {
    for (int t = 1; t <= 2; ++t) {
      if (traj.first_d > t && traj.first_y >= t && traj.first_c > t &&
          traj.first_r0 > t) {
        CHECK(weighted.y_hazard(t, traj.z, traj) ==
              doctest::Approx(plain.y_hazard(t, traj.z, traj)).epsilon(1e-12));
      }
      if (traj.first_d >= t && traj.first_y >= t && traj.first_c > t &&
          traj.first_r0 > t) {
        CHECK(weighted.d_hazard(t, traj.z, traj) ==
              doctest::Approx(plain.d_hazard(t, traj.z, traj)).epsilon(1e-12));
      }
    }
    if (traj.first_d > 1 && traj.first_y > 1 && traj.first_c > 1 &&
        traj.first_r0 > 1 && traj.has_l(1)) {
      CHECK(weighted.ld_prob(1, traj.z, traj) ==
            doctest::Approx(plain.ld_prob(1, traj.z, traj)).epsilon(1e-12));
      CHECK(weighted.ly_prob(1, traj.z, traj) ==
            doctest::Approx(plain.ly_prob(1, traj.z, traj)).epsilon(1e-12));
    }
  }

  // Logistic family: weighted IRLS against duplicated-record IRLS.
  ModelFormula formula;
  formula.role = ModelRole::Y;
  formula.kind = ModelFormula::Kind::Logistic;
  formula.strata = ModelFormula::Strata::Pooled;
  formula.terms = parse_terms({"time", "l0:x", "z"}, data.schema);
  PooledLogisticModel lw = fit_pooled_logistic(data, formula, weights);
  PooledLogisticModel lp = fit_pooled_logistic(duplicated, formula);
  REQUIRE(lw.fits[0].beta.size() == lp.fits[0].beta.size());
  for (size_t j = 0; j < lw.fits[0].beta.size(); ++j)
    CHECK(lw.fits[0].beta[j] == doctest::Approx(lp.fits[0].beta[j]).epsilon(1e-8));
}

TEST_CASE("collapsed conditioning key yields a single marginal row") {
  TrialDataset data = synthetic_trial(800, 23);
  ModelFormula formula;
  formula.role = ModelRole::LD;
  formula.strata = ModelFormula::Strata::Pooled;
  formula.key_full_history = false;
  formula.require_adherence = false;
  DiscreteConditionalModel table =
      fit_discrete_conditional(data, ModelRole::LD, 1, formula);
  CHECK(table.rows.size() == 1);

  // The single row must hold the marginal frequency over the event-free,
  // uncensored individuals regardless of arm, adherence, or history.
  double ones = 0.0, total = 0.0;
  auto trajs = make_trajectories(data);
  for (const Trajectory& traj : trajs) {
    if (!(traj.first_d > 1 && traj.first_y > 1 && traj.first_c > 1 &&
          traj.has_l(1)))
      continue;
    total += 1.0;
    ones += traj.l_values[1][0] == 1.0 ? 1.0 : 0.0;
  }
  const auto& row = table.rows.begin()->second;
  CHECK(row.total == doctest::Approx(total));
  CHECK(row.prob[1] == doctest::Approx(ones / total).epsilon(1e-12));
}

TEST_CASE("constant covariate yields a point mass row") {
  CovariateSchema schema;
  schema.baseline.push_back({"x", CovariateKind::Binary, 2, CovariateBlock::D});
  schema.time_varying.push_back({"w", CovariateKind::Binary, 2, CovariateBlock::D});
  TrialDataset data;
  data.schema = schema;
  data.horizon = 2;
  for (int i = 0; i < 20; ++i) {
    IndividualRecord rec;
    rec.id = "i" + std::to_string(i);
    rec.z = i % 2;
    rec.baseline = {0.0};
    IntervalEntry e1;
    e1.c = 0;
    e1.r = 1;
    e1.d = 0;
    e1.y = 0;
    e1.l = {1.0};  // constant
    rec.intervals.push_back(e1);
    IntervalEntry e2;
    e2.c = 0;
    e2.r = 1;
    e2.d = 0;
    e2.y = 0;
    rec.intervals.push_back(e2);
    data.individuals.push_back(rec);
  }
  ModelFormula formula;
  formula.role = ModelRole::LD;
  formula.strata = ModelFormula::Strata::Pooled;
  DiscreteConditionalModel table =
      fit_discrete_conditional(data, ModelRole::LD, 1, formula);
  for (const auto& [key, row] : table.rows) {
    (void)key;
    CHECK(row.prob[1] == doctest::Approx(1.0));
    CHECK(row.prob[0] == doctest::Approx(0.0));
  }
}

TEST_CASE("nuisance set validates required roles per estimator") {
  TrialDataset data = synthetic_trial(200, 3);
  NuisanceSpec spec = NuisanceSpec::saturated_default();
  spec.formulas.erase(ModelRole::CR);
  CHECK_THROWS_AS(fit_nuisance_set(data, spec, EstimatorKind::OneStep),
                  config_error);
  CHECK_THROWS_AS(fit_nuisance_set(data, spec, EstimatorKind::PlugIn),
                  config_error);
  CHECK_THROWS_AS(fit_nuisance_set(data, spec, EstimatorKind::WeightedY),
                  config_error);

  NuisanceSpec partial;
  for (ModelRole role : {ModelRole::Y, ModelRole::LY, ModelRole::CR}) {
    ModelFormula formula;
    formula.role = role;
    partial.formulas[role] = formula;
  }
  CHECK_NOTHROW(fit_nuisance_set(data, partial, EstimatorKind::WeightedY));
}

TEST_CASE("empty outcome-pathway block makes its law degenerate") {
  CovariateSchema schema;
  schema.baseline.push_back({"x", CovariateKind::Binary, 2, CovariateBlock::D});
  schema.time_varying.push_back({"w", CovariateKind::Binary, 2, CovariateBlock::D});
  TrialDataset data;
  data.schema = schema;
  data.horizon = 2;
  Rng rng(13, 1);
  for (int i = 0; i < 300; ++i) {
    IndividualRecord rec;
    rec.id = "i" + std::to_string(i);
    rec.z = rng.bernoulli(0.5) ? 1 : 0;
    rec.baseline = {rng.bernoulli(0.5) ? 1.0 : 0.0};
    IntervalEntry e1;
    e1.c = 0;
    e1.r = 1;
    e1.d = 0;
    e1.y = rng.bernoulli(0.2) ? 1 : 0;
    if (e1.y == 0) e1.l = {rng.bernoulli(0.5) ? 1.0 : 0.0};
    rec.intervals.push_back(e1);
    IntervalEntry e2;
    if (e1.y == 0) {
      e2.c = 0;
      e2.r = 1;
      e2.d = 0;
      e2.y = rng.bernoulli(0.3) ? 1 : 0;
    }
    rec.intervals.push_back(e2);
    data.individuals.push_back(rec);
  }
  NuisanceSet set = fit_nuisance_set(data, NuisanceSpec::saturated_default(),
                                     EstimatorKind::OneStep);
  CHECK(set.ly.degenerate);
  auto trajs = make_trajectories(data);
  CHECK(set.ly_prob(1, 0, trajs[0]) == doctest::Approx(1.0));
  CHECK(set.ld.degenerate == false);
}

TEST_CASE("arm share reflects weights") {
  TrialDataset data;
  data.schema = baseline_only_schema();
  data.horizon = 1;
  data.individuals.push_back(clean_record("a", 1, 0.0, 0));
  data.individuals.push_back(clean_record("b", 0, 0.0, 0));
  data.individuals.push_back(clean_record("c", 0, 1.0, 1));
  NuisanceSet set = fit_nuisance_set(data, NuisanceSpec::saturated_default(),
                                     EstimatorKind::OneStep, {3.0, 1.0, 1.0});
  CHECK(set.pz(1) == doctest::Approx(0.6));
  CHECK(set.pz(0) == doctest::Approx(0.4));
}

TEST_CASE("model spec json round trips through fitting") {
  TrialDataset data = synthetic_trial(2500, 41);
  std::string text = R"({
    "y":  {"kind": "logistic", "strata": "by_z",
           "terms": ["time", "l0:x", "l:ld/x"]},
    "cr": {"kind": "logistic", "strata": "by_z", "terms": ["time", "l:ld/x"]},
    "ly": {"kind": "saturated"}
  })";
  NuisanceSpec spec = NuisanceSpec::from_json_text(text, data.schema);
  CHECK(spec.formulas.at(ModelRole::Y).kind == ModelFormula::Kind::Logistic);
  CHECK(spec.formulas.at(ModelRole::CR).cr_joint == false);

  NuisanceSet set = fit_nuisance_set(data, spec, EstimatorKind::WeightedY);
  REQUIRE(set.cr.logits.size() == 2);  // sequential censoring and adherence
  CHECK(set.cr.logits[0].submodel == 'c');
  CHECK(set.cr.logits[1].submodel == 'r');
  auto trajs = make_trajectories(data);
  for (const Trajectory& traj : trajs) {
    if (!(traj.first_d >= 1 && traj.first_y >= 1)) continue;
    double pc1 = predict(set.cr.logits[0], traj, 1, traj.z, 1);
    double pr1 = predict(set.cr.logits[1], traj, 1, traj.z, 1);
    CHECK(set.cr_prob(1, traj.z, traj) ==
          doctest::Approx((1.0 - pc1) * pr1).epsilon(1e-12));
    break;
  }

  CHECK_THROWS_AS(NuisanceSpec::from_json_text("[1,2]", data.schema),
                  config_error);
  CHECK_THROWS_AS(
      NuisanceSpec::from_json_text(R"({"y": {"kind": "mystery"}})", data.schema),
      config_error);

  std::string exported = set.to_json_text();
  CHECK(exported.find("\"roles\"") != std::string::npos);
  CHECK(exported.find("\"cr\"") != std::string::npos);
}

TEST_CASE("cross-arm prediction uses the requested arm") {
  TrialDataset data;
  data.schema = baseline_only_schema();
  data.horizon = 1;
  // Arm 1 hazard 0.8, arm 0 hazard 0.2, same baseline cell.
  for (int i = 0; i < 10; ++i) {
    data.individuals.push_back(
        clean_record("a" + std::to_string(i), 1, 0.0, i < 8 ? 1 : 0));
    data.individuals.push_back(
        clean_record("b" + std::to_string(i), 0, 0.0, i < 2 ? 1 : 0));
  }
  NuisanceSet set = fit_nuisance_set(data, NuisanceSpec::saturated_default(),
                                     EstimatorKind::OneStep);
  auto trajs = make_trajectories(data);
  const Trajectory& arm1 = trajs[0];
  CHECK(set.y_hazard(1, 1, arm1) == doctest::Approx(0.8));
  CHECK(set.y_hazard(1, 0, arm1) == doctest::Approx(0.2));  // other arm's table
}
