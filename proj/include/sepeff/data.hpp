// Longitudinal trial data under both treatment encodings.
//
// Temporal convention per record, with K+1 follow-up intervals:
//   L_0, Z, then for k = 1..K+1: C_k, R_k, D_k, Y_k, L_k (L only for k <= K).
// C (censoring), D (competing event) and Y (event of interest) are monotone
// absorbing; R_k is the adherence indicator I(A_k = Z) and is not absorbing
// in the data (individuals may deviate and return; estimators handle this
// through risk sets). Values after absorption are stored as absent, never
// carried forward.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepeff/common.hpp"

namespace sepeff {

enum class CovariateKind { Binary, Categorical, Continuous };

// Time-varying covariates belong to one of two blocks: the block that lies on
// the competing-event pathway (D) or on the outcome pathway (Y). Baseline
// covariates default to the D block; the split only matters for the law
// factorization, not for storage.
enum class CovariateBlock { D, Y };

struct CovariateDef {
  std::string name;
  CovariateKind kind = CovariateKind::Binary;
  int levels = 2;  // used for Binary (=2) and Categorical
  CovariateBlock block = CovariateBlock::D;

  bool discrete() const { return kind != CovariateKind::Continuous; }
};

struct CovariateSchema {
  std::vector<CovariateDef> baseline;      // L_0 components, fixed order
  std::vector<CovariateDef> time_varying;  // L_k components, fixed order

  int baseline_index(const std::string& name) const;      // -1 if absent
  int time_varying_index(const std::string& name) const;  // -1 if absent
  bool all_time_varying_discrete() const;
  bool all_discrete() const;
};

CovariateSchema schema_from_json_file(const std::string& path);
CovariateSchema schema_from_json_text(const std::string& text);
std::string schema_to_json_text(const CovariateSchema& schema);

// One follow-up interval. Flags use -1 for "absent"; covariate values use an
// empty vector for "absent".
struct IntervalEntry {
  std::int8_t c = -1;
  std::int8_t r = -1;
  std::int8_t d = -1;
  std::int8_t y = -1;
  std::vector<double> l;

  bool has_l() const { return !l.empty(); }
};

struct IndividualRecord {
  std::string id;
  int z = 0;
  // Auxiliary second randomization component for four-arm sampling output;
  // estimators only accept two-arm data (z_d_aux absent).
  std::optional<int> z_d_aux;
  std::vector<double> baseline;          // L_0, schema order
  std::vector<IntervalEntry> intervals;  // index k-1 holds interval k
};

struct TrialDataset {
  CovariateSchema schema;
  int horizon = 0;  // K+1, number of follow-up intervals
  std::vector<IndividualRecord> individuals;

  int K() const { return horizon - 1; }
};

// Treatment-centered twin of IndividualRecord: a_k (treatment actually taken)
// replaces z/r_k.
struct TreatmentCenteredRecord {
  std::string id;
  std::vector<double> baseline;
  struct Entry {
    std::int8_t c = -1;
    std::int8_t a = -1;
    std::int8_t d = -1;
    std::int8_t y = -1;
    std::vector<double> l;
  };
  std::vector<Entry> intervals;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string id;
  int time = 0;
  std::string rule;
};

// Empty iff every record satisfies the protocol invariants (monotone
// absorption, within-interval ordering, presence pattern of l).
std::vector<Violation> validate_monotone(const TrialDataset& data);

// Convenience: throw validation_error with an itemized message when the
// report is non-empty.
void require_valid(const TrialDataset& data);

// ---------------------------------------------------------------------------
// CSV ingestion / serialization
//
// Long format, UTF-8, one row per individual-interval. Header:
//   id,time,z,c,r,d,y[,z_d][,l0_<name>...][,l_<name>...]
// `time` runs 1..K+1; baseline covariates either appear on a time-0 row
// (baseline_row = true) or are repeated on every row. Absent values are empty
// cells. The treatment-centered variant has column `a` in place of `z`/`r`.

struct CsvOptions {
  bool baseline_row = false;
};

TrialDataset ingest_csv(const std::string& path, const CovariateSchema& schema,
                        const CsvOptions& opts = {});
TrialDataset ingest_csv_text(const std::string& text,
                             const CovariateSchema& schema,
                             const CsvOptions& opts = {});
std::string dataset_to_csv(const TrialDataset& data,
                           const CsvOptions& opts = {});
void write_csv(const TrialDataset& data, const std::string& path,
               const CsvOptions& opts = {});

std::vector<TreatmentCenteredRecord> ingest_treatment_csv_text(
    const std::string& text, const CovariateSchema& schema,
    const CsvOptions& opts = {});
std::vector<TreatmentCenteredRecord> ingest_treatment_csv(
    const std::string& path, const CovariateSchema& schema,
    const CsvOptions& opts = {});
std::string treatment_to_csv(const std::vector<TreatmentCenteredRecord>& recs,
                             const CovariateSchema& schema, int horizon,
                             const CsvOptions& opts = {});

// ---------------------------------------------------------------------------
// Encoding conversion
//
// Strategy-centered: (Z, R_k) with R_k = I(A_k = Z). Treatment-centered:
// A_k as taken. encode_strategy_centered sets z := a_1, r_k := I(a_k = z).
TrialDataset encode_strategy_centered(
    const std::vector<TreatmentCenteredRecord>& records,
    const CovariateSchema& schema, int horizon);

// Inverse for binary treatment: a_k = z when r_k = 1, else 1 - z.
std::vector<TreatmentCenteredRecord> to_treatment_centered(
    const TrialDataset& data);

// ---------------------------------------------------------------------------
// Risk sets
//
// phi_k(z) = {Z = z, C_k = 0, Rbar_k = 1}; phi_0(z) = {Z = z}. `extra`
// constraints refine with event flags at stated times, e.g. {d, k, 0}.

struct RiskSetFilter {
  int time = 0;
  int z = -1;  // -1: any arm
  bool require_uncensored = true;  // C_time = 0
  bool require_adherent = true;    // R_1..R_time all 1
};

struct FlagConstraint {
  char field = 'd';  // one of 'c', 'r', 'd', 'y'
  int time = 0;
  int value = 0;
};

struct RiskSetEntry {
  int record_index = 0;
  int time = 0;
};

std::vector<RiskSetEntry> risk_set(const TrialDataset& data,
                                   const RiskSetFilter& filter,
                                   const std::vector<FlagConstraint>& extra = {});

// ---------------------------------------------------------------------------
// Trajectory: a per-record digest estimators iterate over. All times use the
// convention first_x = first interval k with x_k = 1 (horizon + 1 when the
// record never absorbs). Deviation time is the first k with r_k = 0.
struct Trajectory {
  int z = 0;
  int z_d_aux = -1;
  int horizon = 0;
  int first_c = 0;
  int first_r0 = 0;
  int first_d = 0;
  int first_y = 0;
  std::vector<double> baseline;
  // l_values[t] holds L_t for t = 0..K (index 0 = baseline, duplicated for
  // uniform term lookup); empty when absent.
  std::vector<std::vector<double>> l_values;

  // Conditioning helpers. Times are interval indices (0 = baseline).
  bool uncensored_through(int t) const { return first_c > t; }
  bool adherent_through(int t) const { return first_r0 > t; }
  bool in_phi(int t, int arm_z) const {
    return z == arm_z && uncensored_through(t) && adherent_through(t);
  }
  bool event_free_through(int t) const {
    return first_d > t && first_y > t;
  }
  int d_at(int t) const { return first_d <= t ? 1 : 0; }
  int y_at(int t) const { return first_y <= t ? 1 : 0; }
  bool has_l(int t) const {
    return t >= 0 && t < static_cast<int>(l_values.size()) &&
           !l_values[t].empty();
  }
};

std::vector<Trajectory> make_trajectories(const TrialDataset& data);

}  // namespace sepeff
