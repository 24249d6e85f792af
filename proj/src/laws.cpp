// Dense conditional law tables over coded histories, plus materialization of
// a fitted saturated NuisanceSet into such tables. Cells start as NaN and
// reads of never-filled cells raise positivity errors, so estimator loops can
// rely on zero-mass skipping instead of NaN propagation.
#include "sepeff/laws.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sepeff/models.hpp"

namespace sepeff {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

long long n_prev(const HistoryCoder& coder, int t) {
  return t == 0 ? 1 : coder.n_hist[static_cast<size_t>(t - 1)];
}

double checked(double v, const char* what, int t, int z, long long key) {
  if (std::isnan(v))
    throw positivity_error(std::string(what) + " at interval " +
                           std::to_string(t) + ", arm " + std::to_string(z) +
                           ", history cell " + std::to_string(key) +
                           " was never fitted");
  return v;
}

}  // namespace

TableLawSet TableLawSet::empty(const CovariateSchema& schema, int horizon) {
  TableLawSet laws;
  laws.schema = schema;
  laws.horizon = horizon;
  laws.coder = HistoryCoder::build(schema, horizon - 1);
  const HistoryCoder& coder = laws.coder;

  laws.y_haz_t.resize(static_cast<size_t>(horizon) + 1);
  laws.d_haz_t.resize(static_cast<size_t>(horizon) + 1);
  laws.cr_t.resize(static_cast<size_t>(horizon) + 1);
  for (int t = 1; t <= horizon; ++t) {
    size_t n = static_cast<size_t>(n_prev(coder, t));  // histories through t-1
    for (int z = 0; z <= 1; ++z) {
      laws.y_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)].assign(n, kNan);
      laws.d_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)].assign(n, kNan);
      laws.cr_t[static_cast<size_t>(t)][static_cast<size_t>(z)].assign(n, kNan);
    }
  }

  laws.ld_t.resize(static_cast<size_t>(horizon));
  laws.ly_t.resize(static_cast<size_t>(horizon));
  for (int t = 0; t <= horizon - 1; ++t) {
    long long keys = n_prev(coder, t);
    long long ldc = coder.ld_cells[static_cast<size_t>(t)];
    long long lyc = coder.ly_cells[static_cast<size_t>(t)];
    for (int z = 0; z <= 1; ++z) {
      laws.ld_t[static_cast<size_t>(t)][static_cast<size_t>(z)].assign(
          static_cast<size_t>(keys * ldc), kNan);
      laws.ly_t[static_cast<size_t>(t)][static_cast<size_t>(z)].assign(
          static_cast<size_t>(keys * ldc * lyc), kNan);
    }
  }
  return laws;
}

double TableLawSet::y_haz(int t, int z, long long h_prev) const {
  return checked(y_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                        [static_cast<size_t>(h_prev)],
                 "outcome hazard", t, z, h_prev);
}

double TableLawSet::d_haz(int t, int z, long long h_prev) const {
  return checked(d_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                        [static_cast<size_t>(h_prev)],
                 "competing hazard", t, z, h_prev);
}

double TableLawSet::cr(int t, int z, long long h_prev) const {
  return checked(cr_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                     [static_cast<size_t>(h_prev)],
                 "continuation probability", t, z, h_prev);
}

double TableLawSet::ld(int t, int z, long long h_prev, long long ld_cell) const {
  long long ldc = coder.ld_cells[static_cast<size_t>(t)];
  long long idx = h_prev * ldc + ld_cell;
  return checked(
      ld_t[static_cast<size_t>(t)][static_cast<size_t>(z)][static_cast<size_t>(idx)],
      "competing-pathway covariate law", t, z, idx);
}

double TableLawSet::ly(int t, int z, long long h_prev, long long ld_cell,
                       long long ly_cell) const {
  long long lyc = coder.ly_cells[static_cast<size_t>(t)];
  long long idx = coder.ly_key(h_prev, ld_cell, t) * lyc + ly_cell;
  return checked(
      ly_t[static_cast<size_t>(t)][static_cast<size_t>(z)][static_cast<size_t>(idx)],
      "outcome-pathway covariate law", t, z, idx);
}

double& TableLawSet::y_haz_ref(int t, int z, long long h_prev) {
  return y_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                [static_cast<size_t>(h_prev)];
}

double& TableLawSet::d_haz_ref(int t, int z, long long h_prev) {
  return d_haz_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
                [static_cast<size_t>(h_prev)];
}

double& TableLawSet::cr_ref(int t, int z, long long h_prev) {
  return cr_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
             [static_cast<size_t>(h_prev)];
}

double& TableLawSet::ld_ref(int t, int z, long long h_prev, long long ld_cell) {
  long long ldc = coder.ld_cells[static_cast<size_t>(t)];
  return ld_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
             [static_cast<size_t>(h_prev * ldc + ld_cell)];
}

double& TableLawSet::ly_ref(int t, int z, long long h_prev, long long ld_cell,
                            long long ly_cell) {
  long long lyc = coder.ly_cells[static_cast<size_t>(t)];
  long long idx = coder.ly_key(h_prev, ld_cell, t) * lyc + ly_cell;
  return ly_t[static_cast<size_t>(t)][static_cast<size_t>(z)]
             [static_cast<size_t>(idx)];
}

std::vector<std::string> TableLawSet::check() const {
  std::vector<std::string> problems;
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  auto scan_hazards = [&](const std::vector<std::array<std::vector<double>, 2>>&
                              tables,
                          const char* what) {
    for (int t = 1; t <= horizon; ++t)
      for (int z = 0; z <= 1; ++z)
        for (double v : tables[static_cast<size_t>(t)][static_cast<size_t>(z)])
          if (!std::isnan(v) && !in_unit(v)) {
            problems.push_back(std::string(what) + " out of [0,1] at interval " +
                               std::to_string(t));
            break;
          }
  };
  scan_hazards(y_haz_t, "outcome hazard");
  scan_hazards(d_haz_t, "competing hazard");
  scan_hazards(cr_t, "continuation probability");

  auto scan_law = [&](const std::vector<std::array<std::vector<double>, 2>>&
                          tables,
                      bool is_ld, const char* what) {
    for (int t = 0; t <= horizon - 1; ++t) {
      long long levels = is_ld ? coder.ld_cells[static_cast<size_t>(t)]
                               : coder.ly_cells[static_cast<size_t>(t)];
      for (int z = 0; z <= 1; ++z) {
        const auto& flat = tables[static_cast<size_t>(t)][static_cast<size_t>(z)];
        for (size_t start = 0; start + static_cast<size_t>(levels) <= flat.size();
             start += static_cast<size_t>(levels)) {
          int nans = 0;
          double sum = 0.0;
          bool bad_value = false;
          for (long long v = 0; v < levels; ++v) {
            double p = flat[start + static_cast<size_t>(v)];
            if (std::isnan(p)) {
              ++nans;
            } else {
              sum += p;
              if (!in_unit(p)) bad_value = true;
            }
          }
          if (nans == levels) continue;  // never-fitted row
          if (nans > 0)
            problems.push_back(std::string(what) +
                               " row partially defined at interval " +
                               std::to_string(t));
          else if (bad_value || std::abs(sum - 1.0) > 1e-9)
            problems.push_back(std::string(what) +
                               " row does not sum to 1 at interval " +
                               std::to_string(t));
        }
      }
    }
  };
  scan_law(ld_t, true, "competing-pathway covariate law");
  scan_law(ly_t, false, "outcome-pathway covariate law");
  return problems;
}

// ---------------------------------------------------------------------------

TableLawSet materialize_laws(const NuisanceSet& fits) {
  for (ModelRole role_id : {ModelRole::Y, ModelRole::D, ModelRole::CR,
                            ModelRole::LD, ModelRole::LY}) {
    const FittedRole& slot = fits.role(role_id);
    if (!slot.present)
      throw config_error(std::string("materialization requires a fitted '") +
                         model_role_name(role_id) + "' model");
    if (slot.degenerate) continue;
    if (slot.formula.kind != ModelFormula::Kind::Saturated)
      throw config_error("materialization requires saturated fits");
  }

  TableLawSet laws = TableLawSet::empty(fits.schema, fits.horizon);
  laws.pz = {1.0 - fits.pz1, fits.pz1};
  const HistoryCoder& coder = laws.coder;

  // Dense cells pull through find(): collapsed-key tables (one marginal row)
  // broadcast across every history, which is the law such a model asserts.
  auto fill_flag = [&](const FittedRole& slot, auto&& assign) {
    for (const DiscreteConditionalModel& table : slot.tables) {
      long long nh = n_prev(coder, table.time);
      for (long long h = 0; h < nh; ++h)
        for (int z = 0; z <= 1; ++z)
          if (const auto* row = table.find(z, table.full_history ? h : 0))
            assign(table.time, z, h, *row);
    }
  };
  fill_flag(fits.y, [&](int t, int z, long long h, const auto& row) {
    laws.y_haz_ref(t, z, h) = row.prob[1];
  });
  fill_flag(fits.d, [&](int t, int z, long long h, const auto& row) {
    laws.d_haz_ref(t, z, h) = row.prob[1];
  });
  fill_flag(fits.cr, [&](int t, int z, long long h, const auto& row) {
    laws.cr_ref(t, z, h) = row.prob[1];
  });

  if (fits.ld.degenerate) {
    for (int t = 0; t <= laws.K(); ++t)
      for (int z = 0; z <= 1; ++z)
        for (auto& v : laws.ld_t[static_cast<size_t>(t)][static_cast<size_t>(z)])
          v = 1.0;
  } else {
    for (const DiscreteConditionalModel& table : fits.ld.tables) {
      long long nh = n_prev(coder, table.time);
      for (long long h = 0; h < nh; ++h)
        for (int z = 0; z <= 1; ++z)
          if (const auto* row = table.find(z, table.full_history ? h : 0))
            for (size_t v = 0; v < row->prob.size(); ++v)
              laws.ld_ref(table.time, z, h, static_cast<long long>(v)) =
                  row->prob[v];
    }
  }

  if (fits.ly.degenerate) {
    for (int t = 0; t <= laws.K(); ++t)
      for (int z = 0; z <= 1; ++z)
        for (auto& v : laws.ly_t[static_cast<size_t>(t)][static_cast<size_t>(z)])
          v = 1.0;
  } else {
    for (const DiscreteConditionalModel& table : fits.ly.tables) {
      int t = table.time;
      long long nh = n_prev(coder, t);
      long long ldc = coder.ld_cells[static_cast<size_t>(t)];
      for (long long h = 0; h < nh; ++h)
        for (long long vd = 0; vd < ldc; ++vd)
          for (int z = 0; z <= 1; ++z) {
            long long key = table.full_history ? coder.ly_key(h, vd, t) : 0;
            if (const auto* row = table.find(z, key))
              for (size_t v = 0; v < row->prob.size(); ++v)
                laws.ly_ref(t, z, h, vd, static_cast<long long>(v)) =
                    row->prob[v];
          }
    }
  }
  return laws;
}

}  // namespace sepeff
