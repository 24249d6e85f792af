// Simulation lab. A DgpSpec is a set of conditional probability tables keyed
// by selectors over the realized past; validation enforces the temporal order
// (a variable may only be keyed by quantities drawn before it), which is also
// what makes dgp_laws exact: every selector a law may use is pinned by the
// conditioning set of the matching estimator conditional.
#include "sepeff/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sepeff/inference.hpp"

namespace sepeff {

using json = nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* selector_kind_name(Selector::Kind kind) {
  switch (kind) {
    case Selector::Kind::Baseline: return "baseline";
    case Selector::Kind::TimeVarying: return "l";
    case Selector::Kind::AY: return "a_y";
    case Selector::Kind::AD: return "a_d";
    case Selector::Kind::ZY: return "z_y";
    case Selector::Kind::ZD: return "z_d";
    case Selector::Kind::R: return "r";
  }
  return "?";
}

Selector::Kind selector_kind_from_name(const std::string& name) {
  if (name == "baseline") return Selector::Kind::Baseline;
  if (name == "l") return Selector::Kind::TimeVarying;
  if (name == "a_y") return Selector::Kind::AY;
  if (name == "a_d") return Selector::Kind::AD;
  if (name == "z_y") return Selector::Kind::ZY;
  if (name == "z_d") return Selector::Kind::ZD;
  if (name == "r") return Selector::Kind::R;
  throw config_error("unknown selector kind '" + name + "'");
}

int selector_levels(const DgpSpec& dgp, const Selector& sel) {
  switch (sel.kind) {
    case Selector::Kind::Baseline: {
      int idx = dgp.schema.baseline_index(sel.name);
      if (idx < 0)
        throw config_error("selector names unknown baseline covariate '" +
                           sel.name + "'");
      return dgp.schema.baseline[static_cast<size_t>(idx)].levels;
    }
    case Selector::Kind::TimeVarying: {
      int idx = dgp.schema.time_varying_index(sel.name);
      if (idx < 0)
        throw config_error("selector names unknown time-varying covariate '" +
                           sel.name + "'");
      return dgp.schema.time_varying[static_cast<size_t>(idx)].levels;
    }
    default:
      return 2;
  }
}

long long key_cells(const DgpSpec& dgp, const std::vector<Selector>& key) {
  long long cells = 1;
  for (const Selector& sel : key) cells *= selector_levels(dgp, sel);
  return cells;
}

// Realized values a law may be keyed by, filled progressively while sampling
// or enumerating. r[t] == 1 for every t under the intervened process.
struct DrawContext {
  std::vector<double> baseline;
  std::vector<std::vector<double>> l;  // l[t], t >= 1
  std::vector<int> r;                  // r[t], t >= 1
  int z_y = 0;
  int z_d = 0;

  explicit DrawContext(int horizon)
      : l(static_cast<size_t>(horizon) + 1), r(static_cast<size_t>(horizon) + 1, 1) {}
};

int selector_value(const DgpSpec& dgp, const Selector& sel,
                   const DrawContext& ctx) {
  switch (sel.kind) {
    case Selector::Kind::Baseline: {
      int idx = dgp.schema.baseline_index(sel.name);
      return static_cast<int>(ctx.baseline[static_cast<size_t>(idx)]);
    }
    case Selector::Kind::TimeVarying: {
      int idx = dgp.schema.time_varying_index(sel.name);
      return static_cast<int>(
          ctx.l[static_cast<size_t>(sel.t)][static_cast<size_t>(idx)]);
    }
    case Selector::Kind::AY:
      return ctx.r[static_cast<size_t>(sel.t)] == 1 ? ctx.z_y : 1 - ctx.z_y;
    case Selector::Kind::AD:
      return ctx.r[static_cast<size_t>(sel.t)] == 1 ? ctx.z_d : 1 - ctx.z_d;
    case Selector::Kind::ZY:
      return ctx.z_y;
    case Selector::Kind::ZD:
      return ctx.z_d;
    case Selector::Kind::R:
      return ctx.r[static_cast<size_t>(sel.t)];
  }
  return 0;
}

long long key_cell(const DgpSpec& dgp, const std::vector<Selector>& key,
                   const DrawContext& ctx) {
  long long cell = 0;
  for (const Selector& sel : key)
    cell = cell * selector_levels(dgp, sel) + selector_value(dgp, sel, ctx);
  return cell;
}

const LawBlock& pick_block(const std::vector<LawBlock>& blocks, int t,
                           const char* what) {
  const LawBlock* fallback = nullptr;
  for (const LawBlock& block : blocks) {
    if (block.t == t) return block;
    if (block.t == -1) fallback = &block;
  }
  if (fallback != nullptr) return *fallback;
  throw config_error(std::string("no law block covers interval ") +
                     std::to_string(t) + " for " + what);
}

double bernoulli_p(const DgpSpec& dgp, const std::vector<LawBlock>& blocks,
                   int t, const DrawContext& ctx, const char* what) {
  const LawBlock& block = pick_block(blocks, t, what);
  return block.probs[static_cast<size_t>(key_cell(dgp, block.key, ctx))];
}

const std::vector<double>& table_row(const DgpSpec& dgp,
                                     const std::vector<LawBlock>& blocks, int t,
                                     const DrawContext& ctx, const char* what) {
  const LawBlock& block = pick_block(blocks, t, what);
  return block.table[static_cast<size_t>(key_cell(dgp, block.key, ctx))];
}

// ---------------------------------------------------------------------------
// Validation helpers.

// What may key the variable being drawn. Times follow the in-interval order
// C_t, R_t, D_t, Y_t, L_t: C/R at t see adherence only through t-1; D/Y/L at
// t see it through t.
struct Availability {
  int self_index = -1;   // drawing covariate with this schema index
  bool baseline_all = true;
  bool same_time_earlier = false;  // covariates earlier in schema order at t
  int max_l = 0;   // latest time-varying time usable
  int max_ar = 0;  // latest A/R time usable (0 = none)
  bool z_allowed = true;
};

void check_key(const DgpSpec& dgp, const std::vector<Selector>& key,
               const Availability& avail, const char* what) {
  for (const Selector& sel : key) {
    std::string label = std::string(what) + " selector '" +
                        selector_kind_name(sel.kind) + "'";
    switch (sel.kind) {
      case Selector::Kind::Baseline: {
        int idx = dgp.schema.baseline_index(sel.name);
        if (idx < 0)
          throw config_error(label + " names unknown covariate '" + sel.name +
                             "'");
        if (!avail.baseline_all && idx >= avail.self_index)
          throw config_error(label +
                             ": baseline laws may only reference covariates "
                             "listed earlier");
        break;
      }
      case Selector::Kind::TimeVarying: {
        int idx = dgp.schema.time_varying_index(sel.name);
        if (idx < 0)
          throw config_error(label + " names unknown covariate '" + sel.name +
                             "'");
        bool past = sel.t >= 1 && sel.t <= avail.max_l;
        bool same_t = avail.same_time_earlier && sel.t == avail.max_l + 1 &&
                      idx < avail.self_index;
        if (!past && !same_t)
          throw config_error(label + " at time " + std::to_string(sel.t) +
                             " is not drawn yet");
        break;
      }
      case Selector::Kind::AY:
      case Selector::Kind::AD:
      case Selector::Kind::R:
        if (sel.t < 1 || sel.t > avail.max_ar)
          throw config_error(label + " at time " + std::to_string(sel.t) +
                             " is not drawn yet");
        break;
      case Selector::Kind::ZY:
      case Selector::Kind::ZD:
        if (!avail.z_allowed)
          throw config_error(label + ": treatment is assigned after baseline "
                                     "covariates");
        break;
    }
  }
}

void check_bernoulli_blocks(const DgpSpec& dgp,
                            const std::vector<LawBlock>& blocks, int t_lo,
                            int t_hi, const Availability& base,
                            const char* what, int ar_offset) {
  for (int t = t_lo; t <= t_hi; ++t) {
    const LawBlock& block = pick_block(blocks, t, what);
    Availability avail = base;
    avail.max_l = t - 1;
    avail.max_ar = t + ar_offset;
    check_key(dgp, block.key, avail, what);
    long long cells = key_cells(dgp, block.key);
    if (static_cast<long long>(block.probs.size()) != cells)
      throw config_error(std::string(what) + " block at interval " +
                         std::to_string(t) + " has " +
                         std::to_string(block.probs.size()) +
                         " probabilities for " + std::to_string(cells) +
                         " cells");
    for (double p : block.probs)
      if (!(p >= 0.0 && p <= 1.0))
        throw config_error(std::string(what) +
                           " probability outside [0, 1]");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DgpSpec

void DgpSpec::validate() const {
  if (horizon < 1) throw config_error("dgp horizon must be at least 1");
  if (!(z_prob > 0.0 && z_prob < 1.0))
    throw config_error("dgp z_prob must lie strictly inside (0, 1)");
  if (!schema.all_discrete())
    throw config_error("dgp covariates must all be discrete");

  auto check_block_order = [](const std::vector<CovariateDef>& defs,
                              const char* where) {
    bool seen_y = false;
    for (const CovariateDef& def : defs) {
      if (def.block == CovariateBlock::Y) seen_y = true;
      else if (seen_y)
        throw config_error(std::string(where) +
                           ": competing-pathway covariates must be listed "
                           "before outcome-pathway covariates");
    }
  };
  check_block_order(schema.baseline, "baseline schema");
  check_block_order(schema.time_varying, "time-varying schema");

  auto check_cov_laws = [&](const std::vector<CovariateLaw>& laws,
                            const std::vector<CovariateDef>& defs, bool tv) {
    if (laws.size() != defs.size())
      throw config_error(tv ? "one law required per time-varying covariate"
                            : "one law required per baseline covariate");
    for (size_t i = 0; i < defs.size(); ++i) {
      if (laws[i].name != defs[i].name)
        throw config_error("covariate law order must match the schema; got '" +
                           laws[i].name + "' where '" + defs[i].name +
                           "' was expected");
      int t_lo = tv ? 1 : 0;
      int t_hi = tv ? K() : 0;
      for (int t = t_lo; t <= t_hi; ++t) {
        const LawBlock& block =
            pick_block(laws[i].blocks, t, laws[i].name.c_str());
        Availability avail;
        avail.self_index = static_cast<int>(i);
        avail.baseline_all = tv;
        avail.same_time_earlier = tv;
        avail.max_l = t - 1;
        avail.max_ar = tv ? t : 0;
        avail.z_allowed = tv;
        check_key(*this, block.key, avail, laws[i].name.c_str());
        long long cells = key_cells(*this, block.key);
        if (static_cast<long long>(block.table.size()) != cells)
          throw config_error("law for '" + laws[i].name + "' at time " +
                             std::to_string(t) + " has " +
                             std::to_string(block.table.size()) +
                             " rows for " + std::to_string(cells) + " cells");
        for (const std::vector<double>& row : block.table) {
          if (static_cast<int>(row.size()) != defs[i].levels)
            throw config_error("law row for '" + laws[i].name +
                               "' does not match the covariate's levels");
          double total = 0.0;
          for (double p : row) {
            if (!(p >= 0.0 && p <= 1.0))
              throw config_error("law probability outside [0, 1] for '" +
                                 laws[i].name + "'");
            total += p;
          }
          if (std::abs(total - 1.0) > 1e-9)
            throw config_error("law row for '" + laws[i].name +
                               "' does not sum to 1");
        }
      }
    }
  };
  check_cov_laws(baseline_laws, schema.baseline, false);
  check_cov_laws(time_varying_laws, schema.time_varying, true);

  Availability events;
  events.baseline_all = true;
  check_bernoulli_blocks(*this, c_laws, 1, horizon, events, "c", -1);
  check_bernoulli_blocks(*this, r_laws, 1, horizon, events, "r", -1);
  check_bernoulli_blocks(*this, d_laws, 1, horizon, events, "d", 0);
  check_bernoulli_blocks(*this, y_laws, 1, horizon, events, "y", 0);
}

namespace {

json selector_to_json(const Selector& sel) {
  json out;
  out["kind"] = selector_kind_name(sel.kind);
  if (sel.kind == Selector::Kind::Baseline ||
      sel.kind == Selector::Kind::TimeVarying)
    out["name"] = sel.name;
  if (sel.kind == Selector::Kind::TimeVarying ||
      sel.kind == Selector::Kind::AY || sel.kind == Selector::Kind::AD ||
      sel.kind == Selector::Kind::R)
    out["t"] = sel.t;
  return out;
}

Selector selector_from_json(const json& in) {
  if (!in.is_object() || !in.contains("kind"))
    throw config_error("selector must be an object with a 'kind'");
  Selector sel;
  sel.kind = selector_kind_from_name(in.at("kind").get<std::string>());
  sel.name = in.value("name", std::string());
  sel.t = in.value("t", 0);
  return sel;
}

json block_to_json(const LawBlock& block) {
  json out;
  out["t"] = block.t;
  out["key"] = json::array();
  for (const Selector& sel : block.key) out["key"].push_back(selector_to_json(sel));
  if (!block.probs.empty()) out["probs"] = block.probs;
  if (!block.table.empty()) out["table"] = block.table;
  return out;
}

LawBlock block_from_json(const json& in) {
  LawBlock block;
  block.t = in.value("t", -1);
  if (in.contains("key"))
    for (const json& sel : in.at("key"))
      block.key.push_back(selector_from_json(sel));
  if (in.contains("probs"))
    block.probs = in.at("probs").get<std::vector<double>>();
  if (in.contains("table"))
    block.table = in.at("table").get<std::vector<std::vector<double>>>();
  return block;
}

std::vector<LawBlock> blocks_from_json(const json& in) {
  std::vector<LawBlock> blocks;
  for (const json& b : in) blocks.push_back(block_from_json(b));
  return blocks;
}

json blocks_to_json(const std::vector<LawBlock>& blocks) {
  json out = json::array();
  for (const LawBlock& block : blocks) out.push_back(block_to_json(block));
  return out;
}

}  // namespace

DgpSpec DgpSpec::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("dgp JSON parse failure: ") + e.what());
  }
  try {
    DgpSpec dgp;
    dgp.name = root.value("name", std::string());
    dgp.horizon = root.at("horizon").get<int>();
    dgp.z_prob = root.value("z_prob", 0.5);
    dgp.schema = schema_from_json_text(root.at("schema").dump());
    auto cov_laws = [&](const char* field) {
      std::vector<CovariateLaw> laws;
      if (!root.contains(field)) return laws;
      for (const json& entry : root.at(field)) {
        CovariateLaw law;
        law.name = entry.at("name").get<std::string>();
        law.blocks = blocks_from_json(entry.at("blocks"));
        laws.push_back(std::move(law));
      }
      return laws;
    };
    dgp.baseline_laws = cov_laws("baseline_laws");
    dgp.time_varying_laws = cov_laws("time_varying_laws");
    if (root.contains("c_laws")) dgp.c_laws = blocks_from_json(root.at("c_laws"));
    if (root.contains("r_laws")) dgp.r_laws = blocks_from_json(root.at("r_laws"));
    if (root.contains("d_laws")) dgp.d_laws = blocks_from_json(root.at("d_laws"));
    if (root.contains("y_laws")) dgp.y_laws = blocks_from_json(root.at("y_laws"));
    dgp.validate();
    return dgp;
  } catch (const json::exception& e) {
    throw config_error(std::string("dgp JSON structure: ") + e.what());
  }
}

DgpSpec DgpSpec::from_json_file(const std::string& path) {
  return from_json_text(slurp(path));
}

std::string DgpSpec::to_json_text() const {
  json root;
  root["name"] = name;
  root["horizon"] = horizon;
  root["z_prob"] = z_prob;
  root["schema"] = json::parse(schema_to_json_text(schema));
  auto cov_laws = [&](const std::vector<CovariateLaw>& laws) {
    json out = json::array();
    for (const CovariateLaw& law : laws) {
      json entry;
      entry["name"] = law.name;
      entry["blocks"] = blocks_to_json(law.blocks);
      out.push_back(entry);
    }
    return out;
  };
  root["baseline_laws"] = cov_laws(baseline_laws);
  root["time_varying_laws"] = cov_laws(time_varying_laws);
  root["c_laws"] = blocks_to_json(c_laws);
  root["r_laws"] = blocks_to_json(r_laws);
  root["d_laws"] = blocks_to_json(d_laws);
  root["y_laws"] = blocks_to_json(y_laws);
  return root.dump(2);
}

// ---------------------------------------------------------------------------
// Sampling

TrialDataset sample_trial(const DgpSpec& dgp, int n, std::uint64_t seed,
                          SamplingMode mode) {
  dgp.validate();
  TrialDataset data;
  data.schema = dgp.schema;
  data.horizon = dgp.horizon;
  data.individuals.reserve(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    DrawContext ctx(dgp.horizon);

    IndividualRecord rec;
    rec.id = std::to_string(i + 1);
    for (size_t c = 0; c < dgp.schema.baseline.size(); ++c) {
      const std::vector<double>& row =
          table_row(dgp, dgp.baseline_laws[c].blocks, 0, ctx,
                    dgp.baseline_laws[c].name.c_str());
      ctx.baseline.push_back(static_cast<double>(rng.categorical(row)));
    }
    rec.baseline = ctx.baseline;

    if (mode == SamplingMode::TwoArm) {
      int z = rng.bernoulli(dgp.z_prob) ? 1 : 0;
      ctx.z_y = ctx.z_d = z;
      rec.z = z;
    } else {
      ctx.z_y = rng.bernoulli(dgp.z_prob) ? 1 : 0;
      ctx.z_d = rng.bernoulli(dgp.z_prob) ? 1 : 0;
      rec.z = ctx.z_y;
      rec.z_d_aux = ctx.z_d;
    }

    for (int t = 1; t <= dgp.horizon; ++t) {
      IntervalEntry entry;
      if (rng.bernoulli(bernoulli_p(dgp, dgp.c_laws, t, ctx, "c"))) {
        entry.c = 1;
        rec.intervals.push_back(std::move(entry));
        break;
      }
      entry.c = 0;
      int r = rng.bernoulli(bernoulli_p(dgp, dgp.r_laws, t, ctx, "r")) ? 1 : 0;
      entry.r = static_cast<std::int8_t>(r);
      ctx.r[static_cast<size_t>(t)] = r;
      if (rng.bernoulli(bernoulli_p(dgp, dgp.d_laws, t, ctx, "d"))) {
        entry.d = 1;
        rec.intervals.push_back(std::move(entry));
        break;
      }
      entry.d = 0;
      if (rng.bernoulli(bernoulli_p(dgp, dgp.y_laws, t, ctx, "y"))) {
        entry.y = 1;
        rec.intervals.push_back(std::move(entry));
        break;
      }
      entry.y = 0;
      if (t <= dgp.K()) {
        std::vector<double> values;
        ctx.l[static_cast<size_t>(t)] = {};
        for (size_t c = 0; c < dgp.schema.time_varying.size(); ++c) {
          const std::vector<double>& row =
              table_row(dgp, dgp.time_varying_laws[c].blocks, t, ctx,
                        dgp.time_varying_laws[c].name.c_str());
          double v = static_cast<double>(rng.categorical(row));
          values.push_back(v);
          ctx.l[static_cast<size_t>(t)].push_back(v);
        }
        entry.l = values;
      }
      rec.intervals.push_back(std::move(entry));
    }
    data.individuals.push_back(std::move(rec));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Exact truth by direct enumeration of the intervened process (no censoring,
// full adherence, treatment components pinned). Shares no code with the
// estimator routes beyond the DGP tables themselves.

namespace {

// Enumerate joint values of the covariates drawn at `t`, invoking fn with the
// joint probability. ctx is restored after each branch.
void for_each_cov_cell(const DgpSpec& dgp,
                       const std::vector<CovariateLaw>& laws, int t,
                       DrawContext& ctx, size_t index, double prob,
                       std::vector<double>& values,
                       const std::function<void(double)>& fn) {
  if (index == laws.size()) {
    fn(prob);
    return;
  }
  const std::vector<double>& row =
      table_row(dgp, laws[index].blocks, t, ctx, laws[index].name.c_str());
  for (size_t v = 0; v < row.size(); ++v) {
    values.push_back(static_cast<double>(v));
    if (t == 0) ctx.baseline.push_back(static_cast<double>(v));
    else ctx.l[static_cast<size_t>(t)].push_back(static_cast<double>(v));
    for_each_cov_cell(dgp, laws, t, ctx, index + 1, prob * row[v], values, fn);
    values.pop_back();
    if (t == 0) ctx.baseline.pop_back();
    else ctx.l[static_cast<size_t>(t)].pop_back();
  }
}

void truth_walk(const DgpSpec& dgp, int t, double mass, DrawContext& ctx,
                std::vector<double>& risk) {
  if (mass == 0.0) return;
  double pd = bernoulli_p(dgp, dgp.d_laws, t, ctx, "d");
  double py = bernoulli_p(dgp, dgp.y_laws, t, ctx, "y");
  risk[static_cast<size_t>(t - 1)] += mass * (1.0 - pd) * py;
  double alive = mass * (1.0 - pd) * (1.0 - py);
  if (t == dgp.horizon || alive == 0.0) return;
  std::vector<double> values;
  for_each_cov_cell(dgp, dgp.time_varying_laws, t, ctx, 0, 1.0, values,
                    [&](double p) { truth_walk(dgp, t + 1, alive * p, ctx, risk); });
}

}  // namespace

RiskCurve exact_truth(const DgpSpec& dgp, ArmPair arm) {
  dgp.validate();
  std::vector<double> risk(static_cast<size_t>(dgp.horizon), 0.0);
  DrawContext ctx(dgp.horizon);
  ctx.z_y = arm.z_y;
  ctx.z_d = arm.z_d;
  std::vector<double> values;
  for_each_cov_cell(dgp, dgp.baseline_laws, 0, ctx, 0, 1.0, values,
                    [&](double p) { truth_walk(dgp, 1, p, ctx, risk); });
  RiskCurve curve;
  curve.arm = arm;
  curve.values.resize(static_cast<size_t>(dgp.horizon));
  double acc = 0.0;
  for (int k = 1; k <= dgp.horizon; ++k) {
    acc += risk[static_cast<size_t>(k - 1)];
    curve.values[static_cast<size_t>(k - 1)] = acc;
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Exact observed-data conditionals under two-arm sampling.

namespace {

struct BlockSplit {
  std::vector<size_t> d_members;  // schema indices in the D block
  std::vector<size_t> y_members;
};

BlockSplit split_blocks(const std::vector<CovariateDef>& defs) {
  BlockSplit split;
  for (size_t i = 0; i < defs.size(); ++i) {
    if (defs[i].block == CovariateBlock::Y) split.y_members.push_back(i);
    else split.d_members.push_back(i);
  }
  return split;
}

// Enumerate values of the listed covariates (a block) at time t, given that
// earlier covariates at t already carry values in ctx.
void for_each_block_cell(const DgpSpec& dgp,
                         const std::vector<CovariateLaw>& laws,
                         const std::vector<size_t>& members, int t,
                         DrawContext& ctx, size_t index, double prob,
                         const std::function<void(double)>& fn) {
  if (index == members.size()) {
    fn(prob);
    return;
  }
  size_t c = members[index];
  const std::vector<double>& row =
      table_row(dgp, laws[c].blocks, t, ctx, laws[c].name.c_str());
  for (size_t v = 0; v < row.size(); ++v) {
    if (t == 0) ctx.baseline.push_back(static_cast<double>(v));
    else ctx.l[static_cast<size_t>(t)].push_back(static_cast<double>(v));
    for_each_block_cell(dgp, laws, members, t, ctx, index + 1, prob * row[v], fn);
    if (t == 0) ctx.baseline.pop_back();
    else ctx.l[static_cast<size_t>(t)].pop_back();
  }
}

void laws_walk(const DgpSpec& dgp, TableLawSet& laws, int z, int t,
               long long h_prev, DrawContext& ctx) {
  double pc = bernoulli_p(dgp, dgp.c_laws, t, ctx, "c");
  double pr = bernoulli_p(dgp, dgp.r_laws, t, ctx, "r");
  laws.cr_ref(t, z, h_prev) = (1.0 - pc) * pr;
  laws.d_haz_ref(t, z, h_prev) = bernoulli_p(dgp, dgp.d_laws, t, ctx, "d");
  laws.y_haz_ref(t, z, h_prev) = bernoulli_p(dgp, dgp.y_laws, t, ctx, "y");
  if (t == dgp.horizon) return;

  const HistoryCoder& coder = laws.coder;
  BlockSplit split = split_blocks(dgp.schema.time_varying);
  long long vd = 0;
  for_each_block_cell(
      dgp, dgp.time_varying_laws, split.d_members, t, ctx, 0, 1.0,
      [&](double pd) {
        laws.ld_ref(t, z, h_prev, vd) = pd;
        long long vy = 0;
        for_each_block_cell(
            dgp, dgp.time_varying_laws, split.y_members, t, ctx, 0, 1.0,
            [&](double py) {
              laws.ly_ref(t, z, h_prev, vd, vy) = py;
              long long h =
                  coder.extend(h_prev, coder.cell_code(vd, vy, t), t);
              laws_walk(dgp, laws, z, t + 1, h, ctx);
              ++vy;
            });
        ++vd;
      });
}

}  // namespace

TableLawSet dgp_laws(const DgpSpec& dgp) {
  dgp.validate();
  TableLawSet laws = TableLawSet::empty(dgp.schema, dgp.horizon);
  laws.pz = {1.0 - dgp.z_prob, dgp.z_prob};
  const HistoryCoder& coder = laws.coder;
  BlockSplit split = split_blocks(dgp.schema.baseline);

  for (int z = 0; z <= 1; ++z) {
    DrawContext ctx(dgp.horizon);
    ctx.z_y = ctx.z_d = z;
    long long vd = 0;
    for_each_block_cell(
        dgp, dgp.baseline_laws, split.d_members, 0, ctx, 0, 1.0,
        [&](double pd) {
          laws.ld_ref(0, z, 0, vd) = pd;
          long long vy = 0;
          for_each_block_cell(
              dgp, dgp.baseline_laws, split.y_members, 0, ctx, 0, 1.0,
              [&](double py) {
                laws.ly_ref(0, z, 0, vd, vy) = py;
                long long h = coder.extend(0, coder.cell_code(vd, vy, 0), 0);
                laws_walk(dgp, laws, z, 1, h, ctx);
                ++vy;
              });
          ++vd;
        });
  }
  return laws;
}

// ---------------------------------------------------------------------------
// Random complete laws.

namespace {

long long n_prev_local(const HistoryCoder& coder, int t) {
  return t == 0 ? 1 : coder.n_hist[static_cast<size_t>(t - 1)];
}

}  // namespace

TableLawSet random_law_set(Rng& rng, const CovariateSchema& schema, int horizon,
                           double margin) {
  TableLawSet laws = TableLawSet::empty(schema, horizon);
  const HistoryCoder& coder = laws.coder;
  auto unit = [&]() { return margin + (1.0 - 2.0 * margin) * rng.uniform(); };

  for (int t = 1; t <= horizon; ++t) {
    long long nh = n_prev_local(coder, t);
    for (int z = 0; z <= 1; ++z)
      for (long long h = 0; h < nh; ++h) {
        laws.y_haz_ref(t, z, h) = unit();
        laws.d_haz_ref(t, z, h) = unit();
        laws.cr_ref(t, z, h) = unit();
      }
  }
  auto random_row = [&](size_t m, std::vector<double>& out) {
    out.resize(m);
    double total = 0.0;
    for (double& v : out) {
      v = rng.uniform();
      total += v;
    }
    double slack = 1.0 - static_cast<double>(m) * margin;
    for (double& v : out) v = margin + slack * (v / total);
  };
  for (int t = 0; t <= horizon - 1; ++t) {
    long long nh = n_prev_local(coder, t);
    long long ldc = coder.ld_cells[static_cast<size_t>(t)];
    long long lyc = coder.ly_cells[static_cast<size_t>(t)];
    std::vector<double> row;
    for (int z = 0; z <= 1; ++z) {
      for (long long h = 0; h < nh; ++h) {
        if (ldc > 1) {
          random_row(static_cast<size_t>(ldc), row);
          for (long long v = 0; v < ldc; ++v)
            laws.ld_ref(t, z, h, v) = row[static_cast<size_t>(v)];
        } else {
          laws.ld_ref(t, z, h, 0) = 1.0;
        }
        for (long long vd = 0; vd < ldc; ++vd) {
          if (lyc > 1) {
            random_row(static_cast<size_t>(lyc), row);
            for (long long v = 0; v < lyc; ++v)
              laws.ly_ref(t, z, h, vd, v) = row[static_cast<size_t>(v)];
          } else {
            laws.ly_ref(t, z, h, vd, 0) = 1.0;
          }
        }
      }
    }
  }
  return laws;
}

// ---------------------------------------------------------------------------
// Misspecification scenario: every time-varying covariate law becomes the
// marginal over records alive and uncensored at t — no history key, no arm
// strata, no adherence restriction.

NuisanceSet misspecified_nuisance_set(const TrialDataset& data,
                                      const NuisanceSpec& base_spec,
                                      EstimatorKind kind,
                                      const std::vector<double>& weights) {
  NuisanceSpec spec = base_spec;
  for (ModelRole role : {ModelRole::LD, ModelRole::LY}) {
    auto it = spec.formulas.find(role);
    if (it == spec.formulas.end()) continue;
    it->second.key_full_history = false;
    it->second.strata = ModelFormula::Strata::Pooled;
    it->second.require_adherence = false;
  }
  return fit_nuisance_set(data, spec, kind, weights);
}

// ---------------------------------------------------------------------------
// Coverage experiment.

Scenario Scenario::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("scenario JSON parse failure: ") + e.what());
  }
  try {
    Scenario sc;
    sc.dgp = DgpSpec::from_json_text(root.at("dgp").dump());
    if (root.contains("nuisance"))
      sc.nuisance =
          NuisanceSpec::from_json_text(root.at("nuisance").dump(), sc.dgp.schema);
    else
      sc.nuisance = NuisanceSpec::saturated_default();
    sc.misspecify_l = root.value("misspecify_l", false);
    if (root.contains("estimators"))
      for (const json& e : root.at("estimators"))
        sc.estimators.push_back(
            estimator_kind_from_name(e.get<std::string>()));
    else
      sc.estimators = {EstimatorKind::PlugIn, EstimatorKind::WeightedY,
                       EstimatorKind::OneStep};
    sc.n = root.value("n", 1000);
    sc.replications = root.value("replications", 200);
    sc.bootstrap_draws = root.value("bootstrap_draws", 200);
    sc.level = root.value("level", 0.95);
    sc.seed = root.value("seed", 1ull);
    sc.threads = root.value("threads", 0);
    if (sc.replications < 1)
      throw config_error("scenario needs at least 1 replication");
    if (!(sc.level > 0.0 && sc.level < 1.0))
      throw config_error("confidence level must lie in (0, 1)");
    if (sc.estimators.empty())
      throw config_error("scenario lists no estimators");
    return sc;
  } catch (const json::exception& e) {
    throw config_error(std::string("scenario JSON structure: ") + e.what());
  }
}

Scenario Scenario::from_json_file(const std::string& path) {
  return from_json_text(slurp(path));
}

namespace {

EstimateReport dispatch_estimator(EstimatorKind kind,
                                  const EstimatorInputs& in, ArmPair arm,
                                  const EstimatorOptions& opts) {
  switch (kind) {
    case EstimatorKind::PlugIn: return plug_in_from_fits(in, arm, opts);
    case EstimatorKind::WeightedY: return weighted_from_fits(in, arm, 'Y', opts);
    case EstimatorKind::WeightedD: return weighted_from_fits(in, arm, 'D', opts);
    case EstimatorKind::OneStep: return one_step_from_fits(in, arm, opts);
  }
  throw config_error("unknown estimator kind");
}

}  // namespace

CoverageTable run_coverage_experiment(const Scenario& scenario) {
  scenario.dgp.validate();
  const std::vector<ArmPair> arms = all_arms();
  const size_t n_est = scenario.estimators.size();
  const size_t n_arm = arms.size();

  CoverageTable table;
  table.scenario_echo = scenario;
  table.scenario_echo.dgp = DgpSpec{};
  table.scenario_echo.dgp.name = scenario.dgp.name;
  for (ArmPair arm : arms)
    table.truth.push_back(exact_truth(scenario.dgp, arm).terminal());

  // Fitting once per (replication, resample) serves every estimator, so the
  // fit must carry every role any of them needs.
  EstimatorKind fit_kind = scenario.estimators.size() == 1
                               ? scenario.estimators.front()
                               : EstimatorKind::OneStep;

  table.details.assign(static_cast<size_t>(scenario.replications),
                       ReplicationDetail{});
  std::atomic<int> next{0};

  auto run_replication = [&](int r) {
    ReplicationDetail& detail =
        table.details[static_cast<size_t>(r)];
    detail.replication = r;
    detail.point.assign(n_est, std::vector<double>(n_arm, kNan));
    detail.lower.assign(n_est, std::vector<double>(n_arm, kNan));
    detail.upper.assign(n_est, std::vector<double>(n_arm, kNan));
    try {
      std::uint64_t data_seed =
          Rng(scenario.seed, static_cast<std::uint64_t>(r)).next_u64();
      TrialDataset data = sample_trial(scenario.dgp, scenario.n, data_seed);
      std::vector<Trajectory> trajs = make_trajectories(data);

      auto fit = [&](const std::vector<double>& w) {
        return scenario.misspecify_l
                   ? misspecified_nuisance_set(data, scenario.nuisance,
                                               fit_kind, w)
                   : fit_nuisance_set(trajs, data.schema, data.horizon,
                                      scenario.nuisance, fit_kind, w);
      };

      NuisanceSet fits0 = fit({});
      EstimatorInputs in;
      in.trajs = &trajs;
      in.fits = &fits0;
      in.horizon = data.horizon;
      // A cell whose point estimate is unidentified on this sample fails
      // alone; other estimator-arm cells keep the replication.
      for (size_t e = 0; e < n_est; ++e)
        for (size_t a = 0; a < n_arm; ++a) {
          try {
            detail.point[e][a] =
                dispatch_estimator(scenario.estimators[e], in, arms[a], {})
                    .terminal;
          } catch (const error& cell_err) {
            if (detail.error.empty()) detail.error = cell_err.what();
          }
        }

      // replicates[e][a][b]
      std::vector<std::vector<std::vector<double>>> reps(
          n_est, std::vector<std::vector<double>>(
                     n_arm, std::vector<double>(
                                static_cast<size_t>(scenario.bootstrap_draws),
                                kNan)));
      for (int b = 0; b < scenario.bootstrap_draws; ++b) {
        Rng brng(scenario.seed, static_cast<std::uint64_t>(r),
                 static_cast<std::uint64_t>(b));
        std::vector<double> w = multinomial_counts(
            brng, static_cast<size_t>(scenario.n));
        try {
          NuisanceSet fits_b = fit(w);
          EstimatorInputs in_b;
          in_b.trajs = &trajs;
          in_b.weights = &w;
          in_b.fits = &fits_b;
          in_b.horizon = data.horizon;
          for (size_t e = 0; e < n_est; ++e)
            for (size_t a = 0; a < n_arm; ++a) {
              try {
                reps[e][a][static_cast<size_t>(b)] =
                    dispatch_estimator(scenario.estimators[e], in_b, arms[a],
                                       {})
                        .terminal;
              } catch (const error&) {
                // failed resample for this cell; stays NaN
              }
            }
        } catch (const error&) {
          // whole-resample fit failure; all cells stay NaN
        }
      }

      double tail = (1.0 - scenario.level) / 2.0;
      for (size_t e = 0; e < n_est; ++e)
        for (size_t a = 0; a < n_arm; ++a) {
          if (std::isnan(detail.point[e][a])) continue;
          std::vector<double> good;
          for (double v : reps[e][a])
            if (!std::isnan(v)) good.push_back(v);
          double fail_frac =
              1.0 - static_cast<double>(good.size()) /
                        static_cast<double>(scenario.bootstrap_draws);
          if (good.empty() || fail_frac > 0.20) continue;  // cell fails
          std::sort(good.begin(), good.end());
          detail.lower[e][a] = quantile_type7(good, tail);
          detail.upper[e][a] = quantile_type7(good, 1.0 - tail);
        }
      detail.ok = true;
    } catch (const std::exception& e) {
      detail.ok = false;
      detail.error = e.what();
    }
  };

  int hw = static_cast<int>(std::thread::hardware_concurrency());
  int n_threads = scenario.threads > 0 ? scenario.threads : (hw > 0 ? hw : 1);
  n_threads = std::min(n_threads, scenario.replications);
  std::vector<std::thread> pool;
  for (int w = 0; w < n_threads; ++w)
    pool.emplace_back([&]() {
      for (;;) {
        int r = next.fetch_add(1);
        if (r >= scenario.replications) return;
        run_replication(r);
      }
    });
  for (std::thread& th : pool) th.join();

  for (size_t e = 0; e < n_est; ++e)
    for (size_t a = 0; a < n_arm; ++a) {
      CoverageCell cell;
      cell.estimator = scenario.estimators[e];
      cell.arm = arms[a];
      int covered = 0;
      for (const ReplicationDetail& detail : table.details) {
        double lo = detail.ok ? detail.lower[e][a] : kNan;
        double hi = detail.ok ? detail.upper[e][a] : kNan;
        if (std::isnan(lo) || std::isnan(hi)) {
          ++cell.failures;
          continue;
        }
        ++cell.successes;
        if (lo <= table.truth[a] && table.truth[a] <= hi) ++covered;
      }
      if (cell.successes > 0) {
        cell.coverage = static_cast<double>(covered) / cell.successes;
        cell.mc_se = std::sqrt(cell.coverage * (1.0 - cell.coverage) /
                               cell.successes);
      }
      table.cells.push_back(cell);
    }
  return table;
}

std::string CoverageTable::to_csv() const {
  std::ostringstream out;
  out << "estimator,n";
  for (ArmPair arm : all_arms())
    out << ",arm_" << arm.z_y << "_" << arm.z_d;
  out << "\n";
  const size_t n_arm = all_arms().size();
  for (size_t e = 0; e * n_arm < cells.size(); ++e) {
    out << estimator_kind_name(cells[e * n_arm].estimator) << ","
        << scenario_echo.n;
    for (size_t a = 0; a < n_arm; ++a)
      out << "," << cells[e * n_arm + a].coverage;
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Bundled benchmark processes.

namespace {

Selector sel_baseline(const std::string& name) {
  Selector s;
  s.kind = Selector::Kind::Baseline;
  s.name = name;
  return s;
}
Selector sel_l(const std::string& name, int t) {
  Selector s;
  s.kind = Selector::Kind::TimeVarying;
  s.name = name;
  s.t = t;
  return s;
}
Selector sel_ay(int t) {
  Selector s;
  s.kind = Selector::Kind::AY;
  s.t = t;
  return s;
}
Selector sel_ad(int t) {
  Selector s;
  s.kind = Selector::Kind::AD;
  s.t = t;
  return s;
}

LawBlock prob_block(int t, std::vector<Selector> key, std::vector<double> probs) {
  LawBlock block;
  block.t = t;
  block.key = std::move(key);
  block.probs = std::move(probs);
  return block;
}

LawBlock table_block(int t, std::vector<Selector> key,
                     std::vector<std::vector<double>> table) {
  LawBlock block;
  block.t = t;
  block.key = std::move(key);
  block.table = std::move(table);
  return block;
}

}  // namespace

DgpSpec two_period_benchmark_dgp() {
  DgpSpec dgp;
  dgp.name = "two-period-benchmark";
  dgp.horizon = 2;
  dgp.z_prob = 0.5;
  dgp.schema.baseline = {{"x", CovariateKind::Binary, 2, CovariateBlock::D}};
  dgp.schema.time_varying = {{"x", CovariateKind::Binary, 2, CovariateBlock::D}};

  dgp.baseline_laws = {{"x", {table_block(0, {}, {{0.5, 0.5}})}}};
  // P(x_1 = 1 | a_d(1), x_0): (2 + x0)/4 when the competing component is
  // taken, (1 + x0)/4 otherwise. Cell order (a_d, x0).
  dgp.time_varying_laws = {
      {"x",
       {table_block(1, {sel_ad(1), sel_baseline("x")},
                    {{3.0 / 4, 1.0 / 4},
                     {1.0 / 2, 1.0 / 2},
                     {1.0 / 2, 1.0 / 2},
                     {1.0 / 4, 3.0 / 4}})}}};

  dgp.c_laws = {prob_block(1, {}, {1.0 / 50}),
                prob_block(2, {sel_l("x", 1)}, {1.0 / 20, 2.0 / 20})};
  dgp.r_laws = {prob_block(1, {}, {4.0 / 5}),
                prob_block(2, {sel_l("x", 1)}, {3.0 / 5, 4.0 / 5})};
  // (1 + l)/20 when the competing component is taken, (1 + l)/30 otherwise.
  dgp.d_laws = {
      prob_block(1, {sel_ad(1), sel_baseline("x")},
                 {1.0 / 30, 2.0 / 30, 1.0 / 20, 2.0 / 20}),
      prob_block(2, {sel_ad(2), sel_l("x", 1)},
                 {1.0 / 30, 2.0 / 30, 1.0 / 20, 2.0 / 20})};
  // (10 + 2l)/20 when the outcome component is taken, (10 - 2l)/20 otherwise.
  dgp.y_laws = {
      prob_block(1, {sel_ay(1), sel_baseline("x")},
                 {10.0 / 20, 8.0 / 20, 10.0 / 20, 12.0 / 20}),
      prob_block(2, {sel_ay(2), sel_l("x", 1)},
                 {10.0 / 20, 8.0 / 20, 10.0 / 20, 12.0 / 20})};
  dgp.validate();
  return dgp;
}

DgpSpec long_horizon_benchmark_dgp() {
  DgpSpec dgp;
  dgp.name = "long-horizon-benchmark";
  dgp.horizon = 30;
  dgp.z_prob = 0.5;
  dgp.schema.baseline = {
      {"male", CovariateKind::Binary, 2, CovariateBlock::D},
      {"black", CovariateKind::Binary, 2, CovariateBlock::D},
      {"age65", CovariateKind::Binary, 2, CovariateBlock::D},
      {"map5", CovariateKind::Categorical, 5, CovariateBlock::D},
  };
  dgp.schema.time_varying = {
      {"map5", CovariateKind::Categorical, 5, CovariateBlock::D}};

  dgp.baseline_laws = {
      {"male", {table_block(0, {}, {{0.36, 0.64}})}},
      {"black", {table_block(0, {}, {{0.70, 0.30}})}},
      {"age65",
       {table_block(0, {sel_baseline("male")}, {{0.70, 0.30}, {0.75, 0.25}})}},
      {"map5",
       {table_block(0, {sel_baseline("age65")},
                    {{0.15, 0.25, 0.30, 0.20, 0.10},
                     {0.10, 0.20, 0.30, 0.25, 0.15}})}},
  };

  auto transition_row = [](int from, bool treated) {
    std::vector<double> row(5, 0.0);
    // Sticky chain with a mild downward drift when the competing-pathway
    // component is taken.
    for (int to = 0; to < 5; ++to) {
      int d = to - from;
      double w = d == 0 ? 0.60 : (std::abs(d) == 1 ? 0.15 : 0.03);
      if (treated && d < 0) w *= 1.5;
      if (treated && d > 0) w *= 0.7;
      row[static_cast<size_t>(to)] = w;
    }
    double total = 0.0;
    for (double v : row) total += v;
    for (double& v : row) v /= total;
    return row;
  };

  std::vector<LawBlock> map_blocks, c_blocks, r_blocks, d_blocks, y_blocks;
  for (int t = 1; t <= dgp.K(); ++t) {
    std::vector<std::vector<double>> table;
    for (int ad = 0; ad <= 1; ++ad)
      for (int from = 0; from < 5; ++from)
        table.push_back(transition_row(from, ad == 1));
    Selector prev = t == 1 ? sel_baseline("map5") : sel_l("map5", t - 1);
    map_blocks.push_back(table_block(t, {sel_ad(t), prev}, table));
  }
  dgp.time_varying_laws = {{"map5", map_blocks}};

  for (int t = 1; t <= dgp.horizon; ++t) {
    Selector prev = t == 1 ? sel_baseline("map5") : sel_l("map5", t - 1);
    c_blocks.push_back(prob_block(t, {}, {0.01}));
    {
      std::vector<double> probs;
      for (int m = 0; m < 5; ++m) probs.push_back(0.975 - 0.005 * m);
      r_blocks.push_back(prob_block(t, {prev}, probs));
    }
    {
      std::vector<double> probs;
      for (int ad = 0; ad <= 1; ++ad)
        for (int m = 0; m < 5; ++m)
          probs.push_back((0.002 + 0.0001 * t) * (1.0 + 0.10 * m) *
                          (ad == 1 ? 0.8 : 1.0));
      d_blocks.push_back(prob_block(t, {sel_ad(t), prev}, probs));
    }
    {
      std::vector<double> probs;
      for (int ay = 0; ay <= 1; ++ay)
        for (int m = 0; m < 5; ++m)
          probs.push_back((0.004 + 0.0002 * t) * (1.0 + 0.15 * m) *
                          (ay == 1 ? 0.75 : 1.0));
      y_blocks.push_back(prob_block(t, {sel_ay(t), prev}, probs));
    }
  }
  dgp.c_laws = std::move(c_blocks);
  dgp.r_laws = std::move(r_blocks);
  dgp.d_laws = std::move(d_blocks);
  dgp.y_laws = std::move(y_blocks);
  dgp.validate();
  return dgp;
}

}  // namespace sepeff
