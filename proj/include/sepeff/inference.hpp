// Bootstrap confidence intervals and separable-effect contrasts.
//
// Resampling unit is the individual (whole trajectory). Resamples enter the
// estimators as multinomial weight vectors, which is algebraically identical
// to refitting on duplicated records. Intervals are percentile intervals with
// type-7 (linear-interpolation) quantiles.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sepeff/common.hpp"
#include "sepeff/estimators.hpp"

namespace sepeff {

struct BootstrapConfig {
  int draws = 200;
  double level = 0.95;
  std::uint64_t seed = 1;
  int threads = 1;
  // Failed resamples are excluded with a count; more than this fraction
  // failing raises positivity_error.
  double max_failure_fraction = 0.20;
};

// Type-7 quantile of a sorted sample.
double quantile_type7(const std::vector<double>& sorted, double p);

struct BootstrapResult {
  std::vector<double> point;
  std::vector<double> lower;
  std::vector<double> upper;
  int failures = 0;
  // replicates[b] holds the statistic vector of resample b (empty = failed).
  std::vector<std::vector<double>> replicates;
};

// statistic(weights) evaluates the estimator under per-individual weights
// (empty = original sample). Throws from the statistic mark a failed
// resample.
BootstrapResult bootstrap_ci(
    int n_individuals,
    const std::function<std::vector<double>(const std::vector<double>&)>&
        statistic,
    const BootstrapConfig& config);

// ---------------------------------------------------------------------------
// Contrasts.
enum class EffectKind { ZYatZD, ZDatZY };
const char* effect_kind_name(EffectKind kind);

struct ContrastReport {
  EffectKind kind = EffectKind::ZYatZD;
  ArmPair arm_a, arm_b;  // effect = arm_a - arm_b
  std::string estimator;
  double point = 0.0;          // terminal-risk difference
  double lower = 0.0, upper = 0.0;
  bool has_interval = false;
  std::vector<double> curve_diff;  // per-time differences
  EstimateReport report_a, report_b;

  std::string to_json_text() const;
  // Four arm rows plus the effect row, mirroring the reporting layout used
  // for sustained-strategy analyses.
  static std::string table_csv(const std::vector<EstimateReport>& arms,
                               const ContrastReport& contrast);
};

// Requires matching estimator kinds and horizons, and arms differing exactly
// in the contrasted component. When both reports carry aligned bootstrap
// replicates (same seed/draws), the interval is the percentile interval of
// the per-replicate differences; otherwise the contrast is point-only.
ContrastReport separable_effect_contrast(const EstimateReport& report_a,
                                         const EstimateReport& report_b,
                                         EffectKind kind);

}  // namespace sepeff
