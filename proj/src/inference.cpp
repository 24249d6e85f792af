// Nonparametric bootstrap over individuals and separable-effect contrasts.
#include "sepeff/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

#include "sepeff/rng.hpp"

namespace sepeff {

using json = nlohmann::json;

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

double quantile_type7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw config_error("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw config_error("quantile probability must lie in [0, 1]");
  if (sorted.size() == 1) return sorted.front();
  double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  size_t lo = static_cast<size_t>(h);
  if (lo >= sorted.size() - 1) return sorted.back();
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

BootstrapResult bootstrap_ci(
    int n_individuals,
    const std::function<std::vector<double>(const std::vector<double>&)>&
        statistic,
    const BootstrapConfig& config) {
  if (n_individuals < 1)
    throw config_error("bootstrap needs at least one individual");
  if (config.draws < 1)
    throw config_error("bootstrap needs at least one draw");
  if (!(config.level > 0.0 && config.level < 1.0))
    throw config_error("confidence level must lie in (0, 1)");

  BootstrapResult result;
  result.point = statistic({});
  const size_t dim = result.point.size();
  result.replicates.assign(static_cast<size_t>(config.draws), {});

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int b = next.fetch_add(1);
      if (b >= config.draws) return;
      Rng rng(config.seed, static_cast<std::uint64_t>(b));
      std::vector<double> w =
          multinomial_counts(rng, static_cast<size_t>(n_individuals));
      try {
        result.replicates[static_cast<size_t>(b)] = statistic(w);
      } catch (const std::exception&) {
        // failed resample; slot stays empty
      }
    }
  };
  int n_threads = std::max(config.threads, 1);
  n_threads = std::min(n_threads, config.draws);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (const std::vector<double>& rep : result.replicates)
    if (rep.empty()) ++result.failures;
  double fail_frac = static_cast<double>(result.failures) /
                     static_cast<double>(config.draws);
  if (fail_frac > config.max_failure_fraction)
    throw positivity_error(
        "bootstrap failed on " + std::to_string(result.failures) + " of " +
        std::to_string(config.draws) +
        " resamples; the sample cannot support resampling-based intervals");

  double tail = (1.0 - config.level) / 2.0;
  result.lower.assign(dim, kNan);
  result.upper.assign(dim, kNan);
  std::vector<double> values;
  for (size_t j = 0; j < dim; ++j) {
    values.clear();
    for (const std::vector<double>& rep : result.replicates)
      if (rep.size() == dim && !std::isnan(rep[j])) values.push_back(rep[j]);
    if (values.empty()) continue;
    std::sort(values.begin(), values.end());
    result.lower[j] = quantile_type7(values, tail);
    result.upper[j] = quantile_type7(values, 1.0 - tail);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Contrasts.

const char* effect_kind_name(EffectKind kind) {
  return kind == EffectKind::ZYatZD ? "zy_at_zd" : "zd_at_zy";
}

ContrastReport separable_effect_contrast(const EstimateReport& report_a,
                                         const EstimateReport& report_b,
                                         EffectKind kind) {
  if (report_a.estimator != report_b.estimator)
    throw config_error("contrast requires the same estimator on both arms");
  if (report_a.curve.size() != report_b.curve.size())
    throw config_error("contrast requires matching horizons");
  if (kind == EffectKind::ZYatZD) {
    if (report_a.arm.z_d != report_b.arm.z_d ||
        report_a.arm.z_y == report_b.arm.z_y)
      throw config_error(
          "outcome-component contrast needs arms sharing z_d and differing "
          "in z_y");
  } else {
    if (report_a.arm.z_y != report_b.arm.z_y ||
        report_a.arm.z_d == report_b.arm.z_d)
      throw config_error(
          "competing-component contrast needs arms sharing z_y and differing "
          "in z_d");
  }

  ContrastReport out;
  out.kind = kind;
  out.arm_a = report_a.arm;
  out.arm_b = report_b.arm;
  out.estimator = report_a.estimator;
  out.report_a = report_a;
  out.report_b = report_b;
  out.point = report_a.terminal - report_b.terminal;
  out.curve_diff.resize(report_a.curve.size());
  for (size_t k = 0; k < report_a.curve.size(); ++k)
    out.curve_diff[k] = report_a.curve[k] - report_b.curve[k];

  // Replicates produced by the same bootstrap stream difference pairwise;
  // the interval is the 95% percentile interval of those differences.
  if (!report_a.replicates.empty() &&
      report_a.replicates.size() == report_b.replicates.size()) {
    std::vector<double> diffs;
    for (size_t b = 0; b < report_a.replicates.size(); ++b) {
      double da = report_a.replicates[b];
      double db = report_b.replicates[b];
      if (!std::isnan(da) && !std::isnan(db)) diffs.push_back(da - db);
    }
    double fail_frac = 1.0 - static_cast<double>(diffs.size()) /
                                 static_cast<double>(report_a.replicates.size());
    if (!diffs.empty() && fail_frac <= 0.20) {
      std::sort(diffs.begin(), diffs.end());
      out.lower = quantile_type7(diffs, 0.025);
      out.upper = quantile_type7(diffs, 0.975);
      out.has_interval = true;
    }
  }
  return out;
}

std::string ContrastReport::to_json_text() const {
  json root;
  root["effect"] = effect_kind_name(kind);
  root["arm_a"] = arm_a.label();
  root["arm_b"] = arm_b.label();
  root["estimator"] = estimator;
  root["point"] = point;
  if (has_interval) {
    root["lower"] = lower;
    root["upper"] = upper;
  }
  root["curve_diff"] = curve_diff;
  root["report_a"] = json::parse(report_a.to_json_text());
  root["report_b"] = json::parse(report_b.to_json_text());
  return root.dump(2);
}

std::string ContrastReport::table_csv(const std::vector<EstimateReport>& arms,
                                      const ContrastReport& contrast) {
  std::string out = "row,arm,estimator,risk,lower,upper\n";
  auto cell = [](double v, bool present) {
    return present ? std::to_string(v) : std::string();
  };
  for (const EstimateReport& rep : arms) {
    bool has_ci = !rep.lower.empty() && !rep.upper.empty();
    out += "arm," + rep.arm.label() + "," + rep.estimator + "," +
           std::to_string(rep.terminal) + "," +
           cell(has_ci ? rep.lower.back() : 0.0, has_ci) + "," +
           cell(has_ci ? rep.upper.back() : 0.0, has_ci) + "\n";
  }
  out += std::string("effect,") + effect_kind_name(contrast.kind) + "," +
         contrast.estimator + "," + std::to_string(contrast.point) + "," +
         cell(contrast.lower, contrast.has_interval) + "," +
         cell(contrast.upper, contrast.has_interval) + "\n";
  return out;
}

}  // namespace sepeff
