// Estimator implementations. Numerical conventions used throughout:
//   * zero-mass skipping: integration loops never multiply a zero branch
//     probability into a child value, so never-identified (NaN) cells cannot
//     poison results they do not influence;
//   * weights accumulate in log space and exponentiate once per (record, s);
//   * denominators pass through a positivity guard that either throws or
//     truncates at the configured floor.
#include "sepeff/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sepeff {

using json = nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

long long n_prev(const HistoryCoder& coder, int t) {
  return t == 0 ? 1 : coder.n_hist[static_cast<size_t>(t - 1)];
}

// Dense history id of a record through time `upto` (-1 gives the root id 0).
long long hist_fold(const HistoryCoder& coder, const Trajectory& traj,
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

// Guard for probabilities that enter denominators.
double floored(double value, const EstimatorOptions& opts, Diagnostics* diag,
               const char* what, int t) {
  if (value > opts.floor) return value;
  if (opts.truncate) {
    if (diag != nullptr) ++diag->positivity_truncations;
    return opts.floor;
  }
  throw positivity_error(std::string(what) + " at interval " +
                         std::to_string(t) + " is " + std::to_string(value) +
                         ", at or below the positivity floor");
}

}  // namespace

// ---------------------------------------------------------------------------
// Probability sources

long long LawProbSource::hist_id(const Trajectory& traj, int through_t) const {
  return hist_fold(laws_->coder, traj, through_t);
}

double LawProbSource::y_haz(int t, int z, const Trajectory& traj) const {
  return laws_->y_haz(t, z, hist_id(traj, t - 1));
}

double LawProbSource::d_haz(int t, int z, const Trajectory& traj) const {
  return laws_->d_haz(t, z, hist_id(traj, t - 1));
}

double LawProbSource::cr(int t, int z, const Trajectory& traj) const {
  return laws_->cr(t, z, hist_id(traj, t - 1));
}

double LawProbSource::ld(int t, int z, const Trajectory& traj) const {
  const HistoryCoder& coder = laws_->coder;
  long long cell =
      coder.ld_code(traj.l_values[static_cast<size_t>(t)], t);
  return laws_->ld(t, z, hist_id(traj, t - 1), cell);
}

double LawProbSource::ly(int t, int z, const Trajectory& traj) const {
  const HistoryCoder& coder = laws_->coder;
  const std::vector<double>& values = traj.l_values[static_cast<size_t>(t)];
  return laws_->ly(t, z, hist_id(traj, t - 1), coder.ld_code(values, t),
                   coder.ly_code(values, t));
}

double FitProbSource::y_haz(int t, int z, const Trajectory& traj) const {
  return fits_->y_hazard(t, z, traj);
}
double FitProbSource::d_haz(int t, int z, const Trajectory& traj) const {
  return fits_->d_hazard(t, z, traj);
}
double FitProbSource::cr(int t, int z, const Trajectory& traj) const {
  return fits_->cr_prob(t, z, traj);
}
double FitProbSource::ld(int t, int z, const Trajectory& traj) const {
  return fits_->ld_prob(t, z, traj);
}
double FitProbSource::ly(int t, int z, const Trajectory& traj) const {
  return fits_->ly_prob(t, z, traj);
}

// ---------------------------------------------------------------------------
// Route 1: nested sum-product over coded histories, forward recursion.

RiskCurve evaluate_g_formula(const TableLawSet& laws, ArmPair arm, int horizon,
                             const EstimatorOptions& opts) {
  (void)opts;
  if (horizon < 1 || horizon > laws.horizon)
    throw config_error("g-formula horizon out of range");
  const HistoryCoder& coder = laws.coder;
  const int zy = arm.z_y, zd = arm.z_d;

  std::vector<double> nu(static_cast<size_t>(horizon), 0.0);
  std::vector<double> mass = {1.0};  // over histories through s-1
  for (int s = 0; s <= horizon - 1; ++s) {
    std::vector<double> next(
        static_cast<size_t>(coder.n_hist[static_cast<size_t>(s)]), 0.0);
    long long ldc = coder.ld_cells[static_cast<size_t>(s)];
    long long lyc = coder.ly_cells[static_cast<size_t>(s)];
    for (long long h_prev = 0; h_prev < static_cast<long long>(mass.size());
         ++h_prev) {
      double m = mass[static_cast<size_t>(h_prev)];
      if (m == 0.0) continue;
      if (s >= 1) {
        m *= 1.0 - laws.y_haz(s, zy, h_prev);
        if (m == 0.0) continue;
      }
      for (long long vd = 0; vd < ldc; ++vd) {
        double pd = laws.ld(s, zd, h_prev, vd);
        if (pd == 0.0) continue;
        for (long long vy = 0; vy < lyc; ++vy) {
          double py = laws.ly(s, zy, h_prev, vd, vy);
          if (py == 0.0) continue;
          long long h = coder.extend(h_prev, coder.cell_code(vd, vy, s), s);
          double branch =
              m * pd * py * (1.0 - laws.d_haz(s + 1, zd, h));
          next[static_cast<size_t>(h)] = branch;
          if (branch != 0.0)
            nu[static_cast<size_t>(s)] += branch * laws.y_haz(s + 1, zy, h);
        }
      }
    }
    mass = std::move(next);
  }

  RiskCurve curve;
  curve.arm = arm;
  curve.values.resize(static_cast<size_t>(horizon));
  double acc = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    acc += nu[static_cast<size_t>(k - 1)];
    curve.values[static_cast<size_t>(k - 1)] = acc;
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Weighted routes

WeightTrajectory weight_trajectories(const std::vector<Trajectory>& trajs,
                                     const ProbSource& probs, ArmPair arm,
                                     char route, const EstimatorOptions& opts,
                                     const std::vector<double>* weights) {
  if (route != 'Y' && route != 'D')
    throw config_error("weighted route must be 'Y' or 'D'");
  WeightTrajectory wt;
  wt.arm = arm;
  wt.route = route;
  wt.n = static_cast<int>(trajs.size());
  wt.horizon = trajs.empty() ? 0 : trajs.front().horizon;
  const int n = wt.n, horizon = wt.horizon;
  const int zy = arm.z_y, zd = arm.z_d;
  const int cond = route == 'Y' ? zd : zy;
  size_t cells = static_cast<size_t>(n) * static_cast<size_t>(horizon);
  wt.active.assign(cells, 0);
  wt.log_cr.assign(cells, 0.0);
  wt.log_ratio.assign(cells, 0.0);
  wt.log_l.assign(cells, 0.0);
  wt.total.assign(cells, 0.0);
  if (route == 'Y') wt.event_factor.assign(cells, kNan);

  Diagnostics truncation_diag;
  for (int i = 0; i < n; ++i) {
    const Trajectory& traj = trajs[static_cast<size_t>(i)];
    if (traj.z != cond) continue;
    if (weights != nullptr && !weights->empty() &&
        (*weights)[static_cast<size_t>(i)] == 0.0)
      continue;
    double lcr = 0.0, lratio = 0.0, ll = 0.0;
    for (int s = 0; s <= horizon - 1; ++s) {
      if (!traj.event_free_through(s)) break;
      if (!(traj.uncensored_through(s + 1) && traj.adherent_through(s + 1)))
        break;
      // Covariate-law ratio at s (keyed by the history through s-1).
      if (route == 'Y') {
        double num = probs.ly(s, zy, traj);
        double den = floored(probs.ly(s, zd, traj), opts, &truncation_diag,
                             "outcome-pathway covariate law", s);
        ll += std::log(num) - std::log(den);
        if (s >= 1) {
          double snum = 1.0 - probs.y_haz(s, zy, traj);
          double sden = floored(1.0 - probs.y_haz(s, zd, traj), opts,
                                &truncation_diag, "outcome survival", s);
          lratio += std::log(snum) - std::log(sden);
        }
        lcr -= std::log(floored(probs.cr(s + 1, zd, traj), opts,
                                &truncation_diag, "continuation probability",
                                s + 1));
      } else {
        double num = probs.ld(s, zd, traj);
        double den = floored(probs.ld(s, zy, traj), opts, &truncation_diag,
                             "competing-pathway covariate law", s);
        ll += std::log(num) - std::log(den);
        double snum = 1.0 - probs.d_haz(s + 1, zd, traj);
        double sden = floored(1.0 - probs.d_haz(s + 1, zy, traj), opts,
                              &truncation_diag, "competing survival", s + 1);
        lratio += std::log(snum) - std::log(sden);
        lcr -= std::log(floored(probs.cr(s + 1, zy, traj), opts,
                                &truncation_diag, "continuation probability",
                                s + 1));
      }
      size_t idx = static_cast<size_t>(i) * static_cast<size_t>(horizon) +
                   static_cast<size_t>(s);
      wt.active[idx] = 1;
      wt.log_cr[idx] = lcr;
      wt.log_ratio[idx] = lratio;
      wt.log_l[idx] = ll;
      wt.total[idx] = std::exp(lcr + lratio + ll);
      if (route == 'Y' && traj.first_y == s + 1 && traj.first_d > s + 1) {
        double num = probs.y_haz(s + 1, zy, traj);
        double den = floored(probs.y_haz(s + 1, zd, traj), opts,
                             &truncation_diag, "outcome hazard", s + 1);
        wt.event_factor[idx] = num / den;
      }
    }
  }
  wt.truncations = truncation_diag.positivity_truncations;
  return wt;
}

EstimateReport weighted_estimate_core(const std::vector<Trajectory>& trajs,
                                      const std::vector<double>& weights,
                                      const ProbSource& probs, ArmPair arm,
                                      char route, int horizon,
                                      const EstimatorOptions& opts) {
  WeightTrajectory wt =
      weight_trajectories(trajs, probs, arm, route, opts,
                          weights.empty() ? nullptr : &weights);
  const int cond = route == 'Y' ? arm.z_d : arm.z_y;

  double denom = 0.0;
  for (size_t i = 0; i < trajs.size(); ++i)
    if (trajs[i].z == cond) denom += weights.empty() ? 1.0 : weights[i];
  if (denom <= 0.0)
    throw positivity_error("no observations in the conditioning arm");

  EstimateReport report;
  report.arm = arm;
  report.estimator =
      route == 'Y' ? estimator_kind_name(EstimatorKind::WeightedY)
                   : estimator_kind_name(EstimatorKind::WeightedD);
  std::vector<double> nu(static_cast<size_t>(horizon), 0.0);
  report.diagnostics.ess_per_time.assign(static_cast<size_t>(horizon), 0.0);
  report.diagnostics.positivity_truncations = wt.truncations;
  std::vector<double> wsum(static_cast<size_t>(horizon), 0.0),
      wsq(static_cast<size_t>(horizon), 0.0);

  for (size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& traj = trajs[i];
    if (traj.z != cond) continue;
    double w = weights.empty() ? 1.0 : weights[i];
    for (int s = 0; s <= horizon - 1; ++s) {
      size_t idx = i * static_cast<size_t>(horizon) + static_cast<size_t>(s);
      if (wt.active[idx] == 0) continue;
      double total = wt.total[idx];
      report.diagnostics.max_weight =
          std::max(report.diagnostics.max_weight, total);
      wsum[static_cast<size_t>(s)] += w * total;
      wsq[static_cast<size_t>(s)] += w * total * total;
      if (traj.first_y == s + 1 && traj.first_d > s + 1) {
        double contribution = w * total;
        if (route == 'Y') contribution *= wt.event_factor[idx];
        nu[static_cast<size_t>(s)] += contribution;
      }
    }
  }

  for (int s = 0; s <= horizon - 1; ++s) {
    size_t su = static_cast<size_t>(s);
    report.diagnostics.ess_per_time[su] =
        wsq[su] > 0.0 ? wsum[su] * wsum[su] / wsq[su] : 0.0;
  }

  report.curve.resize(static_cast<size_t>(horizon));
  double acc = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    acc += nu[static_cast<size_t>(k - 1)] / denom;
    report.curve[static_cast<size_t>(k - 1)] = acc;
  }
  report.terminal = report.curve.back();
  return report;
}

// ---------------------------------------------------------------------------
// Iterated-conditional-expectation tables

IceSlice ice_tables(const TableLawSet& laws, ArmPair arm, int s,
                    const EstimatorOptions& opts) {
  (void)opts;
  const HistoryCoder& coder = laws.coder;
  const int zy = arm.z_y, zd = arm.z_d;
  IceSlice slice;
  slice.s = s;
  slice.outcome_tail.resize(static_cast<size_t>(s) + 2);
  slice.competing_tail.resize(static_cast<size_t>(s) + 2);
  slice.yblock_tail.resize(static_cast<size_t>(s) + 2);
  slice.dblock_tail.resize(static_cast<size_t>(s) + 2);

  auto raw_y = [&](int t, int z, long long h) {
    return laws.y_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                       [static_cast<size_t>(h)];
  };
  auto raw_d = [&](int t, int z, long long h) {
    return laws.d_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                       [static_cast<size_t>(h)];
  };
  auto raw_ld = [&](int t, int z, long long h, long long v) {
    long long ldc = coder.ld_cells[static_cast<size_t>(t)];
    return laws.ld_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                    [static_cast<size_t>(h * ldc + v)];
  };
  auto raw_ly = [&](int t, int z, long long h, long long vd, long long vy) {
    long long lyc = coder.ly_cells[static_cast<size_t>(t)];
    return laws.ly_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                    [static_cast<size_t>(coder.ly_key(h, vd, t) * lyc + vy)];
  };

  for (int j = s + 1; j >= 1; --j) {
    size_t ju = static_cast<size_t>(j);
    long long nh = coder.n_hist[static_cast<size_t>(j - 1)];

    // outcome_tail[j]: terminal hazard at j = s+1, interior survival splice
    // below once dblock_tail[j+1] exists.
    if (j == s + 1) {
      slice.outcome_tail[ju].resize(static_cast<size_t>(nh));
      for (long long h = 0; h < nh; ++h)
        slice.outcome_tail[ju][static_cast<size_t>(h)] = raw_y(s + 1, zy, h);
    } else {
      slice.outcome_tail[ju].resize(static_cast<size_t>(nh));
      for (long long h = 0; h < nh; ++h) {
        double surv = 1.0 - raw_y(j, zy, h);
        slice.outcome_tail[ju][static_cast<size_t>(h)] =
            surv == 0.0
                ? 0.0
                : surv * slice.dblock_tail[ju + 1][static_cast<size_t>(h)];
      }
    }

    slice.competing_tail[ju].resize(static_cast<size_t>(nh));
    for (long long h = 0; h < nh; ++h) {
      double surv = 1.0 - raw_d(j, zd, h);
      slice.competing_tail[ju][static_cast<size_t>(h)] =
          surv == 0.0 ? 0.0
                      : surv * slice.outcome_tail[ju][static_cast<size_t>(h)];
    }

    long long np = n_prev(coder, j - 1);
    long long ldc = coder.ld_cells[static_cast<size_t>(j - 1)];
    long long lyc = coder.ly_cells[static_cast<size_t>(j - 1)];
    slice.yblock_tail[ju].assign(static_cast<size_t>(np * ldc), 0.0);
    slice.dblock_tail[ju].assign(static_cast<size_t>(np), 0.0);
    for (long long hp = 0; hp < np; ++hp) {
      double d_acc = 0.0;
      for (long long vd = 0; vd < ldc; ++vd) {
        double y_acc = 0.0;
        for (long long vy = 0; vy < lyc; ++vy) {
          double py = raw_ly(j - 1, zy, hp, vd, vy);
          if (py == 0.0) continue;
          long long h = coder.extend(hp, coder.cell_code(vd, vy, j - 1), j - 1);
          y_acc += py * slice.competing_tail[ju][static_cast<size_t>(h)];
        }
        slice.yblock_tail[ju][static_cast<size_t>(hp * ldc + vd)] = y_acc;
        double pd = raw_ld(j - 1, zd, hp, vd);
        if (pd == 0.0) continue;
        d_acc += pd * y_acc;
      }
      slice.dblock_tail[ju][static_cast<size_t>(hp)] = d_acc;
    }
  }
  return slice;
}

IfWorkspace build_if_workspace(const TableLawSet& laws, ArmPair arm,
                               const EstimatorOptions& opts) {
  IfWorkspace ws;
  ws.arm = arm;
  ws.horizon = laws.horizon;
  ws.laws = &laws;
  for (int s = 0; s <= laws.K(); ++s)
    ws.slices.push_back(ice_tables(laws, arm, s, opts));
  return ws;
}

// ---------------------------------------------------------------------------
// Influence terms

namespace {

double checked_table(double v, const char* what) {
  if (std::isnan(v))
    throw positivity_error(std::string(what) +
                           ": expectation never identified during fitting");
  return v;
}

// Per-record evaluation state: realized history ids, covariate cells, and
// lazily extended weight products for both treatment components.
struct RecordState {
  const TableLawSet* laws;
  const Trajectory* traj;
  const EstimatorOptions* opts;
  int zy, zd;
  std::vector<long long> hist;     // hist[j] = id through j-1 (hist[0] = 0)
  std::vector<long long> ld_cell;  // realized cells per time
  std::vector<long long> ly_cell;
  std::vector<double> omega;  // product chain for the competing component
  std::vector<double> lambda;  // product chain for the outcome component
  int max_l = -1;  // largest t with covariates realized

  RecordState(const TableLawSet& l, const Trajectory& t,
              const EstimatorOptions& o, ArmPair arm)
      : laws(&l), traj(&t), opts(&o), zy(arm.z_y), zd(arm.z_d) {
    int K = l.K();
    hist.push_back(0);
    for (int j = 0; j <= K; ++j) {
      if (!t.has_l(j)) break;
      const std::vector<double>& values = t.l_values[static_cast<size_t>(j)];
      long long vd = l.coder.ld_code(values, j);
      long long vy = l.coder.ly_code(values, j);
      ld_cell.push_back(vd);
      ly_cell.push_back(vy);
      hist.push_back(l.coder.extend(hist.back(), l.coder.cell_code(vd, vy, j), j));
      max_l = j;
    }
  }

  long long h(int through) const {  // id through `through`
    return hist[static_cast<size_t>(through + 1)];
  }

  double floorv(double v, const char* what, int t) const {
    return floored(v, *opts, nullptr, what, t);
  }

  // Omega_j: competing-component weight through j. Requires covariates
  // through j and at-risk continuation through j.
  double omega_at(int j) {
    while (static_cast<int>(omega.size()) <= j) {
      int jj = static_cast<int>(omega.size());
      double prev = jj == 0 ? 1.0 / floorv(laws->pz[static_cast<size_t>(zy)],
                                           "arm probability", 0)
                            : omega[static_cast<size_t>(jj - 1)];
      double rr_d = 1.0;
      double pi = 1.0;
      if (jj >= 1) {
        double num = 1.0 - laws->d_haz(jj, zd, h(jj - 1));
        double den =
            floorv(1.0 - laws->d_haz(jj, zy, h(jj - 1)), "competing survival", jj);
        rr_d = num / den;
        pi = floorv(laws->cr(jj, zy, h(jj - 1)), "continuation probability", jj);
      }
      double num_l = laws->ld(jj, zd, h(jj - 1), ld_cell[static_cast<size_t>(jj)]);
      double den_l =
          floorv(laws->ld(jj, zy, h(jj - 1), ld_cell[static_cast<size_t>(jj)]),
                 "competing-pathway covariate law", jj);
      omega.push_back(prev * rr_d * (num_l / den_l) / pi);
    }
    return omega[static_cast<size_t>(j)];
  }

  // Lambda_j: outcome-component weight through j.
  double lambda_at(int j) {
    while (static_cast<int>(lambda.size()) <= j) {
      int jj = static_cast<int>(lambda.size());
      double prev = jj == 0 ? 1.0 / floorv(laws->pz[static_cast<size_t>(zd)],
                                           "arm probability", 0)
                            : lambda[static_cast<size_t>(jj - 1)];
      double factor = 1.0;
      if (jj >= 1) {
        double num_s = 1.0 - laws->y_haz(jj, zy, h(jj - 1));
        double den_s =
            floorv(1.0 - laws->y_haz(jj, zd, h(jj - 1)), "outcome survival", jj);
        double pi =
            floorv(laws->cr(jj, zd, h(jj - 1)), "continuation probability", jj);
        factor = rr_ly(jj - 1) * (num_s / den_s) / pi;
      }
      lambda.push_back(prev * factor);
    }
    return lambda[static_cast<size_t>(j)];
  }

  // Outcome-pathway covariate-law ratio at time t (realized cell).
  double rr_ly(int t) {
    if (t < 0) return 1.0;
    double num = laws->ly(t, zy, h(t - 1), ld_cell[static_cast<size_t>(t)],
                          ly_cell[static_cast<size_t>(t)]);
    double den =
        floorv(laws->ly(t, zd, h(t - 1), ld_cell[static_cast<size_t>(t)],
                        ly_cell[static_cast<size_t>(t)]),
               "outcome-pathway covariate law", t);
    return num / den;
  }

  double rr_d(int t) {
    if (t < 1) return 1.0;
    double num = 1.0 - laws->d_haz(t, zd, h(t - 1));
    double den =
        floorv(1.0 - laws->d_haz(t, zy, h(t - 1)), "competing survival", t);
    return num / den;
  }
};

}  // namespace

std::vector<double> influence_terms(const Trajectory& traj,
                                    const IfWorkspace& ws,
                                    const EstimatorOptions& opts) {
  const TableLawSet& laws = *ws.laws;
  const int zy = ws.arm.z_y, zd = ws.arm.z_d;
  const int K = ws.horizon - 1;
  std::vector<double> out(static_cast<size_t>(K) + 1, 0.0);
  const bool is_y_arm = traj.z == zy;
  const bool is_d_arm = traj.z == zd;
  if (!is_y_arm && !is_d_arm) return out;

  RecordState st(laws, traj, opts, ws.arm);
  const HistoryCoder& coder = laws.coder;

  auto x4 = [&](const IceSlice& sl, int j, long long h) {
    return checked_table(sl.outcome_tail[static_cast<size_t>(j)]
                                        [static_cast<size_t>(h)],
                         "outcome tail");
  };
  auto x3 = [&](const IceSlice& sl, int j, long long h) {
    return checked_table(sl.competing_tail[static_cast<size_t>(j)]
                                          [static_cast<size_t>(h)],
                         "competing tail");
  };
  auto x2 = [&](const IceSlice& sl, int j, long long h_prev, long long vd) {
    long long ldc = coder.ld_cells[static_cast<size_t>(j - 1)];
    return checked_table(sl.yblock_tail[static_cast<size_t>(j)]
                                       [static_cast<size_t>(h_prev * ldc + vd)],
                         "outcome-block tail");
  };
  auto x1 = [&](const IceSlice& sl, int j, long long h_prev) {
    return checked_table(sl.dblock_tail[static_cast<size_t>(j)]
                                       [static_cast<size_t>(h_prev)],
                         "competing-block tail");
  };

  for (int s = 0; s <= K; ++s) {
    const IceSlice& sl = ws.slices[static_cast<size_t>(s)];
    double acc = 0.0;

    // Outer blocks at the target time.
    if (traj.event_free_through(s)) {
      if (is_y_arm) {
        if (traj.in_phi(s + 1, zy) && traj.d_at(s + 1) == 0) {
          double w = st.omega_at(s) * st.rr_d(s + 1) /
                     st.floorv(laws.cr(s + 1, zy, st.h(s)),
                               "continuation probability", s + 1);
          acc += w * (traj.y_at(s + 1) - x4(sl, s + 1, st.h(s)));
        }
        if (traj.in_phi(s, zy)) {
          acc += st.omega_at(s) *
                 (x3(sl, s + 1, st.h(s)) -
                  x2(sl, s + 1, st.h(s - 1), st.ld_cell[static_cast<size_t>(s)]));
        }
      }
      if (is_d_arm) {
        if (traj.in_phi(s + 1, zd)) {
          double w = st.lambda_at(s) * st.rr_ly(s) /
                     st.floorv(laws.cr(s + 1, zd, st.h(s)),
                               "continuation probability", s + 1);
          acc += w * (x4(sl, s + 1, st.h(s)) *
                          (1.0 - traj.d_at(s + 1)) -
                      x3(sl, s + 1, st.h(s)));
        }
        if (traj.in_phi(s, zd)) {
          acc += st.lambda_at(s) *
                 (x2(sl, s + 1, st.h(s - 1), st.ld_cell[static_cast<size_t>(s)]) -
                  x1(sl, s + 1, st.h(s - 1)));
        }
      }
    }

    // Inner blocks j = 1..s.
    for (int j = 1; j <= s; ++j) {
      if (!traj.event_free_through(j - 1)) break;
      if (is_y_arm) {
        if (traj.in_phi(j, zy) && traj.d_at(j) == 0) {
          double w = st.omega_at(j - 1) * st.rr_d(j) /
                     st.floorv(laws.cr(j, zy, st.h(j - 1)),
                               "continuation probability", j);
          acc += w * (x1(sl, j + 1, st.h(j - 1)) * (1.0 - traj.y_at(j)) -
                      x4(sl, j, st.h(j - 1)));
        }
        if (traj.in_phi(j - 1, zy)) {
          acc += st.omega_at(j - 1) *
                 (x3(sl, j, st.h(j - 1)) -
                  x2(sl, j, st.h(j - 2), st.ld_cell[static_cast<size_t>(j - 1)]));
        }
      }
      if (is_d_arm) {
        if (traj.in_phi(j, zd)) {
          double w = st.lambda_at(j - 1) * st.rr_ly(j - 1) /
                     st.floorv(laws.cr(j, zd, st.h(j - 1)),
                               "continuation probability", j);
          acc += w * (x4(sl, j, st.h(j - 1)) * (1.0 - traj.d_at(j)) -
                      x3(sl, j, st.h(j - 1)));
        }
        if (traj.in_phi(j - 1, zd)) {
          acc += st.lambda_at(j - 1) *
                 (x2(sl, j, st.h(j - 2), st.ld_cell[static_cast<size_t>(j - 1)]) -
                  x1(sl, j, st.h(j - 2)));
        }
      }
    }
    out[static_cast<size_t>(s)] = acc;
  }
  return out;
}

double influence_contribution(const Trajectory& traj, const IfWorkspace& ws,
                              const EstimatorOptions& opts) {
  std::vector<double> terms = influence_terms(traj, ws, opts);
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Population enumeration

Population enumerate_population(const TableLawSet& laws) {
  Population pop;
  const HistoryCoder& coder = laws.coder;
  const int horizon = laws.horizon;
  const int K = laws.K();

  struct Frame {
    int t = 1;  // next interval to resolve
    long long h = 0;
    double mass = 0.0;
    std::vector<std::vector<double>> l_values;
  };

  auto emit = [&](int z, const Frame& frame, double mass, int first_c,
                  int first_r0, int first_d, int first_y) {
    if (mass == 0.0) return;
    Trajectory traj;
    traj.z = z;
    traj.horizon = horizon;
    traj.first_c = first_c;
    traj.first_r0 = first_r0;
    traj.first_d = first_d;
    traj.first_y = first_y;
    traj.baseline = frame.l_values[0];
    traj.l_values = frame.l_values;
    pop.trajs.push_back(std::move(traj));
    pop.weights.push_back(mass);
  };

  for (int z = 0; z <= 1; ++z) {
    double pz = laws.pz[static_cast<size_t>(z)];
    if (pz == 0.0) continue;

    // Depth-first expansion over (interval, history) with explicit stack.
    std::vector<Frame> stack;
    long long ld0 = coder.ld_cells[0], ly0 = coder.ly_cells[0];
    for (long long vd = 0; vd < ld0; ++vd) {
      double pd = laws.ld(0, z, 0, vd);
      if (pd == 0.0) continue;
      for (long long vy = 0; vy < ly0; ++vy) {
        double py = laws.ly(0, z, 0, vd, vy);
        if (py == 0.0) continue;
        Frame frame;
        frame.t = 1;
        frame.h = coder.extend(0, coder.cell_code(vd, vy, 0), 0);
        frame.mass = pz * pd * py;
        frame.l_values.assign(static_cast<size_t>(horizon), {});
        frame.l_values[0] = cell_values(laws.schema, 0, vd, vy);
        stack.push_back(std::move(frame));
      }
    }

    const int never = horizon + 1;
    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      int t = frame.t;

      // Exit from the observable frame (censoring or deviation, lumped).
      double crp = laws.cr(t, z, frame.h);
      emit(z, frame, frame.mass * (1.0 - crp), t, t, never, never);
      double alive = frame.mass * crp;
      if (alive == 0.0) continue;

      double dh = laws.d_haz(t, z, frame.h);
      emit(z, frame, alive * dh, never, never, t, never);
      double after_d = alive * (1.0 - dh);
      if (after_d == 0.0) continue;

      double yh = laws.y_haz(t, z, frame.h);
      emit(z, frame, after_d * yh, never, never, never, t);
      double after_y = after_d * (1.0 - yh);
      if (after_y == 0.0) continue;

      if (t == horizon) {  // completed follow-up event-free
        emit(z, frame, after_y, never, never, never, never);
        continue;
      }

      long long ldc = coder.ld_cells[static_cast<size_t>(t)];
      long long lyc = coder.ly_cells[static_cast<size_t>(t)];
      for (long long vd = 0; vd < ldc; ++vd) {
        double pd = laws.ld(t, z, frame.h, vd);
        if (pd == 0.0) continue;
        for (long long vy = 0; vy < lyc; ++vy) {
          double py = laws.ly(t, z, frame.h, vd, vy);
          if (py == 0.0) continue;
          Frame child = frame;
          child.t = t + 1;
          child.h = coder.extend(frame.h, coder.cell_code(vd, vy, t), t);
          child.mass = after_y * pd * py;
          child.l_values[static_cast<size_t>(t)] =
              cell_values(laws.schema, t, vd, vy);
          if (t > K) throw error("internal: covariate draw past horizon");
          stack.push_back(std::move(child));
        }
      }
    }
  }
  return pop;
}

// ---------------------------------------------------------------------------
// Reports and top-level entry points

std::string EstimateReport::to_json_text() const {
  json root;
  root["arm"] = {{"z_y", arm.z_y}, {"z_d", arm.z_d}};
  root["estimator"] = estimator;
  root["curve"] = curve;
  root["terminal"] = terminal;
  if (!fingerprint.empty()) root["fingerprint"] = fingerprint;
  if (!lower.empty()) {
    root["lower"] = lower;
    root["upper"] = upper;
  }
  json diag;
  diag["max_weight"] = diagnostics.max_weight;
  diag["positivity_truncations"] = diagnostics.positivity_truncations;
  if (!diagnostics.ess_per_time.empty())
    diag["ess_per_time"] = diagnostics.ess_per_time;
  if (!diagnostics.warnings.empty()) diag["warnings"] = diagnostics.warnings;
  root["diagnostics"] = diag;
  return root.dump(2);
}

EstimateReport plug_in_from_fits(const EstimatorInputs& in, ArmPair arm,
                                 const EstimatorOptions& opts) {
  TableLawSet laws = materialize_laws(*in.fits);
  RiskCurve curve = evaluate_g_formula(laws, arm, in.horizon, opts);
  EstimateReport report;
  report.arm = arm;
  report.estimator = estimator_kind_name(EstimatorKind::PlugIn);
  report.curve = curve.values;
  report.terminal = curve.terminal();
  return report;
}

EstimateReport weighted_from_fits(const EstimatorInputs& in, ArmPair arm,
                                  char route, const EstimatorOptions& opts) {
  FitProbSource probs(*in.fits);
  static const std::vector<double> kNoWeights;
  return weighted_estimate_core(*in.trajs,
                                in.weights != nullptr ? *in.weights : kNoWeights,
                                probs, arm, route, in.horizon, opts);
}

EstimateReport one_step_from_fits(const EstimatorInputs& in, ArmPair arm,
                                  const EstimatorOptions& opts) {
  TableLawSet laws = materialize_laws(*in.fits);
  RiskCurve plug = evaluate_g_formula(laws, arm, in.horizon, opts);
  IfWorkspace ws = build_if_workspace(laws, arm, opts);

  const std::vector<Trajectory>& trajs = *in.trajs;
  std::vector<double> correction(static_cast<size_t>(in.horizon), 0.0);
  double wtotal = 0.0;
  for (size_t i = 0; i < trajs.size(); ++i) {
    double w = in.weights != nullptr && !in.weights->empty()
                   ? (*in.weights)[i]
                   : 1.0;
    wtotal += w;
    if (w == 0.0) continue;
    std::vector<double> terms = influence_terms(trajs[i], ws, opts);
    double acc = 0.0;
    for (int k = 1; k <= in.horizon; ++k) {
      acc += terms[static_cast<size_t>(k - 1)];
      correction[static_cast<size_t>(k - 1)] += w * acc;
    }
  }
  if (wtotal <= 0.0) throw positivity_error("dataset has zero total weight");

  EstimateReport report;
  report.arm = arm;
  report.estimator = estimator_kind_name(EstimatorKind::OneStep);
  report.curve.resize(static_cast<size_t>(in.horizon));
  for (int k = 1; k <= in.horizon; ++k)
    report.curve[static_cast<size_t>(k - 1)] =
        plug.values[static_cast<size_t>(k - 1)] +
        correction[static_cast<size_t>(k - 1)] / wtotal;
  report.terminal = report.curve.back();
  return report;
}

namespace {

EstimateReport estimate_from_data(const TrialDataset& data,
                                  const NuisanceSpec& spec, ArmPair arm,
                                  EstimatorKind kind,
                                  const EstimatorOptions& opts) {
  for (const auto& rec : data.individuals)
    if (rec.z_d_aux.has_value())
      throw validation_error(
          "estimators accept two-arm data only; collapse the auxiliary "
          "randomization first");
  NuisanceSet fits = fit_nuisance_set(data, spec, kind);
  std::vector<Trajectory> trajs = make_trajectories(data);
  EstimatorInputs in;
  in.trajs = &trajs;
  in.weights = nullptr;
  in.fits = &fits;
  in.horizon = data.horizon;
  switch (kind) {
    case EstimatorKind::PlugIn:
      return plug_in_from_fits(in, arm, opts);
    case EstimatorKind::WeightedY:
      return weighted_from_fits(in, arm, 'Y', opts);
    case EstimatorKind::WeightedD:
      return weighted_from_fits(in, arm, 'D', opts);
    case EstimatorKind::OneStep:
      return one_step_from_fits(in, arm, opts);
  }
  throw config_error("unknown estimator kind");
}

}  // namespace

EstimateReport plug_in_estimate(const TrialDataset& data,
                                const NuisanceSpec& spec, ArmPair arm,
                                const EstimatorOptions& opts) {
  return estimate_from_data(data, spec, arm, EstimatorKind::PlugIn, opts);
}

EstimateReport weighted_y_estimate(const TrialDataset& data,
                                   const NuisanceSpec& spec, ArmPair arm,
                                   const EstimatorOptions& opts) {
  return estimate_from_data(data, spec, arm, EstimatorKind::WeightedY, opts);
}

EstimateReport weighted_d_estimate(const TrialDataset& data,
                                   const NuisanceSpec& spec, ArmPair arm,
                                   const EstimatorOptions& opts) {
  return estimate_from_data(data, spec, arm, EstimatorKind::WeightedD, opts);
}

EstimateReport one_step_estimate(const TrialDataset& data,
                                 const NuisanceSpec& spec, ArmPair arm,
                                 const EstimatorOptions& opts) {
  return estimate_from_data(data, spec, arm, EstimatorKind::OneStep, opts);
}

}  // namespace sepeff
