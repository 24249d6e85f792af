// Mixed-radix history coding for discrete covariate processes.
#include "sepeff/histories.hpp"

#include <cmath>

namespace sepeff {

namespace {

// Radix product over the covariates of one block at one time.
long long block_cells(const std::vector<CovariateDef>& defs,
                      CovariateBlock block) {
  long long n = 1;
  for (const auto& d : defs) {
    if (d.block != block) continue;
    if (!d.discrete())
      throw config_error("history coding requires discrete covariates; '" +
                         d.name + "' is continuous");
    n *= d.levels;
  }
  return n;
}

long long pack(const std::vector<CovariateDef>& defs,
               const std::vector<double>& values, CovariateBlock block) {
  long long code = 0;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    if (defs[i].block != block) continue;
    if (i >= values.size())
      throw config_error("covariate vector shorter than schema");
    double v = values[i];
    if (std::nearbyint(v) != v || v < 0.0 ||
        v >= static_cast<double>(defs[i].levels))
      throw config_error("covariate value out of range for '" + defs[i].name +
                         "'");
    code = code * defs[i].levels + static_cast<long long>(v);
  }
  return code;
}

}  // namespace

HistoryCoder HistoryCoder::build(const CovariateSchema& schema, int K) {
  HistoryCoder c;
  c.schema = schema;
  c.K = K;
  c.ld_cells.resize(K + 1);
  c.ly_cells.resize(K + 1);
  c.cells.resize(K + 1);
  c.n_hist.resize(K + 1);
  long long total = 1;
  const double kMax = std::ldexp(1.0, 62);
  for (int t = 0; t <= K; ++t) {
    const auto& defs = t == 0 ? schema.baseline : schema.time_varying;
    c.ld_cells[t] = block_cells(defs, CovariateBlock::D);
    c.ly_cells[t] = block_cells(defs, CovariateBlock::Y);
    c.cells[t] = c.ld_cells[t] * c.ly_cells[t];
    if (static_cast<double>(total) * static_cast<double>(c.cells[t]) >= kMax)
      throw config_error("history space exceeds 62 bits; use a model instead");
    total *= c.cells[t];
    c.n_hist[t] = total;
  }
  return c;
}

long long HistoryCoder::ld_code(const std::vector<double>& values,
                                int t) const {
  const auto& defs = t == 0 ? schema.baseline : schema.time_varying;
  return pack(defs, values, CovariateBlock::D);
}

long long HistoryCoder::ly_code(const std::vector<double>& values,
                                int t) const {
  const auto& defs = t == 0 ? schema.baseline : schema.time_varying;
  return pack(defs, values, CovariateBlock::Y);
}

void HistoryCoder::decode(long long h, int t, std::vector<long long>* ld,
                          std::vector<long long>* ly) const {
  ld->assign(t + 1, 0);
  ly->assign(t + 1, 0);
  for (int s = t; s >= 0; --s) {
    long long cell = h % cells[s];
    h /= cells[s];
    (*ld)[s] = cell / ly_cells[s];
    (*ly)[s] = cell % ly_cells[s];
  }
}

std::vector<double> cell_values(const CovariateSchema& schema, int t,
                                long long ld, long long ly) {
  const auto& defs = t == 0 ? schema.baseline : schema.time_varying;
  std::vector<double> out(defs.size(), 0.0);
  // Unpack each block in reverse of pack()'s most-significant-first order.
  for (int i = static_cast<int>(defs.size()) - 1; i >= 0; --i) {
    if (defs[i].block == CovariateBlock::D) {
      out[i] = static_cast<double>(ld % defs[i].levels);
      ld /= defs[i].levels;
    } else {
      out[i] = static_cast<double>(ly % defs[i].levels);
      ly /= defs[i].levels;
    }
  }
  return out;
}

}  // namespace sepeff
