// Estimator-route identities. The load-bearing suite: on complete two-period
// laws, a deliberately naive direct-summation oracle, the forward recursion,
// both weighted routes evaluated on the exactly enumerated population, and
// the one-step (whose correction must vanish on the generating law) must all
// produce the same risks to near machine precision. A sampled-data case
// checks the same coincidences at the empirical distribution under saturated
// fits.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sepeff/estimators.hpp"
#include "sepeff/rng.hpp"
#include "sepeff/simulation.hpp"
#include "test_support.hpp"

using namespace sepeff;

namespace {

CovariateSchema d_block_schema() {
  CovariateSchema schema;
  schema.baseline.push_back({"x", CovariateKind::Binary, 2, CovariateBlock::D});
  schema.time_varying.push_back(
      {"x", CovariateKind::Binary, 2, CovariateBlock::D});
  return schema;
}

CovariateSchema mixed_block_schema() {
  CovariateSchema schema;
  schema.baseline.push_back({"u", CovariateKind::Binary, 2, CovariateBlock::D});
  schema.baseline.push_back({"w", CovariateKind::Binary, 2, CovariateBlock::Y});
  schema.time_varying.push_back(
      {"v", CovariateKind::Binary, 2, CovariateBlock::Y});
  return schema;
}

// One-step correction over an exact population: weighted mean of the
// per-record influence contributions truncated at horizon k.
double population_correction(const Population& pop, const IfWorkspace& ws,
                             int k) {
  double total = 0.0;
  for (size_t i = 0; i < pop.trajs.size(); ++i) {
    std::vector<double> terms = influence_terms(pop.trajs[i], ws);
    double acc = 0.0;
    for (int s = 0; s < k; ++s) acc += terms[static_cast<size_t>(s)];
    total += pop.weights[i] * acc;
  }
  return total;
}

}  // namespace

TEST_CASE("forward recursion matches the flat oracle on random laws") {
  for (int rep = 0; rep < 12; ++rep) {
    for (const CovariateSchema& schema :
         {d_block_schema(), mixed_block_schema()}) {
      Rng rng(20260814, static_cast<std::uint64_t>(rep),
              schema.time_varying[0].name == "x" ? 0u : 1u);
      TableLawSet laws = random_law_set(rng, schema, 2);
      for (ArmPair arm : all_arms()) {
        auto oracle = sepeff_test::flat_two_period_risk(laws, arm);
        RiskCurve curve = evaluate_g_formula(laws, arm, 2);
        REQUIRE(curve.values.size() == 2);
        CHECK(std::abs(curve.values[0] - oracle[0]) <= 1e-10);
        CHECK(std::abs(curve.values[1] - oracle[1]) <= 1e-10);
        // Curves are cumulative risks: nondecreasing, inside [0, 1].
        CHECK(curve.values[0] >= 0.0);
        CHECK(curve.values[1] >= curve.values[0]);
        CHECK(curve.values[1] <= 1.0);
      }
    }
  }
}

TEST_CASE("weighted routes on the exact population match the oracle") {
  for (int rep = 0; rep < 12; ++rep) {
    for (const CovariateSchema& schema :
         {d_block_schema(), mixed_block_schema()}) {
      Rng rng(911, static_cast<std::uint64_t>(rep),
              schema.time_varying[0].name == "x" ? 0u : 1u);
      TableLawSet laws = random_law_set(rng, schema, 2);
      Population pop = enumerate_population(laws);

      double mass = 0.0;
      for (double w : pop.weights) {
        CHECK(w >= 0.0);
        mass += w;
      }
      CHECK(std::abs(mass - 1.0) <= 1e-12);

      LawProbSource probs(laws);
      for (ArmPair arm : all_arms()) {
        auto oracle = sepeff_test::flat_two_period_risk(laws, arm);
        EstimateReport wy = weighted_estimate_core(pop.trajs, pop.weights,
                                                   probs, arm, 'Y', 2);
        EstimateReport wd = weighted_estimate_core(pop.trajs, pop.weights,
                                                   probs, arm, 'D', 2);
        REQUIRE(wy.curve.size() == 2);
        REQUIRE(wd.curve.size() == 2);
        CHECK(std::abs(wy.curve[0] - oracle[0]) <= 1e-10);
        CHECK(std::abs(wy.curve[1] - oracle[1]) <= 1e-10);
        CHECK(std::abs(wd.curve[0] - oracle[0]) <= 1e-10);
        CHECK(std::abs(wd.curve[1] - oracle[1]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("one-step correction vanishes on the generating law") {
  for (int rep = 0; rep < 12; ++rep) {
    for (const CovariateSchema& schema :
         {d_block_schema(), mixed_block_schema()}) {
      Rng rng(424242, static_cast<std::uint64_t>(rep),
              schema.time_varying[0].name == "x" ? 0u : 1u);
      TableLawSet laws = random_law_set(rng, schema, 2);
      Population pop = enumerate_population(laws);
      for (ArmPair arm : all_arms()) {
        auto oracle = sepeff_test::flat_two_period_risk(laws, arm);
        RiskCurve plug = evaluate_g_formula(laws, arm, 2);
        IfWorkspace ws = build_if_workspace(laws, arm);
        for (int k = 1; k <= 2; ++k) {
          double corr = population_correction(pop, ws, k);
          CHECK(std::abs(corr) <= 1e-10);
          double one_step =
              plug.values[static_cast<size_t>(k - 1)] + corr;
          CHECK(std::abs(one_step - oracle[static_cast<size_t>(k - 1)]) <=
                1e-10);
        }
      }
    }
  }
}

TEST_CASE("iterated-expectation slices reproduce per-interval increments") {
  Rng rng(7);
  TableLawSet laws = random_law_set(rng, d_block_schema(), 2);
  for (ArmPair arm : all_arms()) {
    RiskCurve curve = evaluate_g_formula(laws, arm, 2);
    for (int s = 0; s <= 1; ++s) {
      IceSlice slice = ice_tables(laws, arm, s);
      double nu = slice.dblock_tail[1][0];
      double increment = s == 0 ? curve.values[0]
                                : curve.values[1] - curve.values[0];
      CHECK(std::abs(nu - increment) <= 1e-12);
    }
  }
}

TEST_CASE("population classes follow the dataset conventions") {
  Rng rng(99);
  TableLawSet laws = random_law_set(rng, d_block_schema(), 2);
  Population pop = enumerate_population(laws);
  REQUIRE(!pop.trajs.empty());
  int censored_classes = 0;
  for (const Trajectory& traj : pop.trajs) {
    CHECK((traj.z == 0 || traj.z == 1));
    if (traj.first_c <= 2) {
      // Protocol-leaving classes carry both markers at the same interval.
      CHECK(traj.first_c == traj.first_r0);
      ++censored_classes;
    }
  }
  CHECK(censored_classes > 0);
}

TEST_CASE("saturated fits make all four routes coincide on the sample") {
  DgpSpec dgp = two_period_benchmark_dgp();
  TrialDataset data = sample_trial(dgp, 600, 31);
  std::vector<Trajectory> trajs = make_trajectories(data);
  NuisanceSet fits = fit_nuisance_set(data, NuisanceSpec::saturated_default(),
                                      EstimatorKind::OneStep);
  EstimatorInputs in;
  in.trajs = &trajs;
  in.fits = &fits;
  in.horizon = data.horizon;

  for (ArmPair arm : all_arms()) {
    EstimateReport plug = plug_in_from_fits(in, arm);
    EstimateReport wy = weighted_from_fits(in, arm, 'Y');
    EstimateReport wd = weighted_from_fits(in, arm, 'D');
    EstimateReport os = one_step_from_fits(in, arm);
    for (size_t k = 0; k < 2; ++k) {
      CHECK(std::abs(wy.curve[k] - plug.curve[k]) <= 1e-9);
      CHECK(std::abs(wd.curve[k] - plug.curve[k]) <= 1e-9);
      CHECK(std::abs(os.curve[k] - plug.curve[k]) <= 1e-9);
    }
  }
}

TEST_CASE("unidentified cells raise positivity errors when reached") {
  Rng rng(5);
  TableLawSet laws = random_law_set(rng, d_block_schema(), 2);
  laws.y_haz_ref(2, 1, 0) = std::nan("");
  CHECK_THROWS_AS(evaluate_g_formula(laws, ArmPair{1, 1}, 2),
                  positivity_error);
  // The same gap is invisible at horizon 1.
  CHECK_NOTHROW(evaluate_g_formula(laws, ArmPair{1, 1}, 1));
}

TEST_CASE("weight denominators at the floor: throw or truncate") {
  Rng rng(6);
  TableLawSet laws = random_law_set(rng, d_block_schema(), 2);
  Population pop = enumerate_population(laws);
  // Push one continuation propensity to an impossible value.
  laws.cr_ref(1, 1, 0) = 0.0;
  LawProbSource probs(laws);
  CHECK_THROWS_AS(weighted_estimate_core(pop.trajs, pop.weights, probs,
                                         ArmPair{1, 1}, 'Y', 2),
                  positivity_error);
  EstimatorOptions truncate;
  truncate.truncate = true;
  EstimateReport rep = weighted_estimate_core(pop.trajs, pop.weights, probs,
                                              ArmPair{1, 1}, 'Y', 2, truncate);
  CHECK(rep.diagnostics.positivity_truncations > 0);
}

TEST_CASE("four-arm records are rejected by the estimator entry point") {
  DgpSpec dgp = two_period_benchmark_dgp();
  TrialDataset data = sample_trial(dgp, 50, 8, SamplingMode::FourArm);
  CHECK_THROWS_AS(plug_in_estimate(data, NuisanceSpec::saturated_default(),
                                   ArmPair{1, 1}),
                  validation_error);
}

TEST_CASE("estimates are invariant to covariate level relabeling") {
  DgpSpec dgp = two_period_benchmark_dgp();
  TrialDataset data = sample_trial(dgp, 500, 13);
  TrialDataset flipped = data;
  for (IndividualRecord& rec : flipped.individuals) {
    rec.baseline[0] = 1.0 - rec.baseline[0];
    for (IntervalEntry& entry : rec.intervals)
      if (!entry.l.empty()) entry.l[0] = 1.0 - entry.l[0];
  }
  NuisanceSpec spec = NuisanceSpec::saturated_default();
  for (ArmPair arm : all_arms()) {
    EstimateReport a = plug_in_estimate(data, spec, arm);
    EstimateReport b = plug_in_estimate(flipped, spec, arm);
    CHECK(std::abs(a.terminal - b.terminal) <= 1e-12);
    EstimateReport wa = weighted_y_estimate(data, spec, arm);
    EstimateReport wb = weighted_y_estimate(flipped, spec, arm);
    CHECK(std::abs(wa.terminal - wb.terminal) <= 1e-12);
    EstimateReport oa = one_step_estimate(data, spec, arm);
    EstimateReport ob = one_step_estimate(flipped, spec, arm);
    CHECK(std::abs(oa.terminal - ob.terminal) <= 1e-12);
  }
}
