// Longitudinal data: schema JSON, protocol validation, CSV in/out, encoding
// conversion, risk sets, trajectory digests.
#include "sepeff/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sepeff {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Schema

int CovariateSchema::baseline_index(const std::string& name) const {
  for (std::size_t i = 0; i < baseline.size(); ++i)
    if (baseline[i].name == name) return static_cast<int>(i);
  return -1;
}

int CovariateSchema::time_varying_index(const std::string& name) const {
  for (std::size_t i = 0; i < time_varying.size(); ++i)
    if (time_varying[i].name == name) return static_cast<int>(i);
  return -1;
}

bool CovariateSchema::all_time_varying_discrete() const {
  for (const auto& c : time_varying)
    if (!c.discrete()) return false;
  return true;
}

bool CovariateSchema::all_discrete() const {
  for (const auto& c : baseline)
    if (!c.discrete()) return false;
  return all_time_varying_discrete();
}

namespace {

CovariateKind kind_from_string(const std::string& s) {
  if (s == "binary") return CovariateKind::Binary;
  if (s == "categorical") return CovariateKind::Categorical;
  if (s == "continuous") return CovariateKind::Continuous;
  throw config_error("unknown covariate kind '" + s + "'");
}

const char* kind_to_string(CovariateKind k) {
  switch (k) {
    case CovariateKind::Binary: return "binary";
    case CovariateKind::Categorical: return "categorical";
    default: return "continuous";
  }
}

CovariateDef covariate_from_json(const json& j) {
  CovariateDef def;
  def.name = j.at("name").get<std::string>();
  def.kind = kind_from_string(j.value("kind", std::string("binary")));
  def.levels = j.value("levels", 2);
  if (def.kind == CovariateKind::Binary) def.levels = 2;
  if (def.kind == CovariateKind::Categorical && def.levels < 2)
    throw config_error("categorical covariate '" + def.name +
                       "' needs >= 2 levels");
  std::string block = j.value("block", std::string("d"));
  if (block == "d" || block == "D")
    def.block = CovariateBlock::D;
  else if (block == "y" || block == "Y")
    def.block = CovariateBlock::Y;
  else
    throw config_error("covariate block must be 'd' or 'y', got '" + block +
                       "'");
  return def;
}

json covariate_to_json(const CovariateDef& def) {
  json j;
  j["name"] = def.name;
  j["kind"] = kind_to_string(def.kind);
  if (def.kind == CovariateKind::Categorical) j["levels"] = def.levels;
  j["block"] = def.block == CovariateBlock::D ? "d" : "y";
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CovariateSchema schema_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw config_error(std::string("schema JSON parse error: ") + e.what());
  }
  CovariateSchema schema;
  for (const auto& c : j.value("baseline", json::array()))
    schema.baseline.push_back(covariate_from_json(c));
  for (const auto& c : j.value("time_varying", json::array()))
    schema.time_varying.push_back(covariate_from_json(c));
  // Duplicate names are configuration mistakes.
  std::vector<std::string> names;
  for (const auto& c : schema.baseline) names.push_back("l0_" + c.name);
  for (const auto& c : schema.time_varying) names.push_back("l_" + c.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end())
    throw config_error("duplicate covariate name in schema");
  return schema;
}

CovariateSchema schema_from_json_file(const std::string& path) {
  return schema_from_json_text(read_file(path));
}

std::string schema_to_json_text(const CovariateSchema& schema) {
  json j;
  j["baseline"] = json::array();
  for (const auto& c : schema.baseline) j["baseline"].push_back(covariate_to_json(c));
  j["time_varying"] = json::array();
  for (const auto& c : schema.time_varying)
    j["time_varying"].push_back(covariate_to_json(c));
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool valid_covariate_value(const CovariateDef& def, double v) {
  if (!std::isfinite(v)) return false;
  if (def.kind == CovariateKind::Continuous) return true;
  double r = std::nearbyint(v);
  return r == v && r >= 0.0 && r < static_cast<double>(def.levels);
}

enum class State { Alive, Censored, Dead, Event };

}  // namespace

std::vector<Violation> validate_monotone(const TrialDataset& data) {
  std::vector<Violation> out;
  const int horizon = data.horizon;
  const auto& schema = data.schema;
  for (const auto& rec : data.individuals) {
    auto flag = [&](int t, const std::string& rule) {
      out.push_back({rec.id, t, rule});
    };
    if (rec.z != 0 && rec.z != 1) flag(0, "invalid z");
    if (rec.z_d_aux && *rec.z_d_aux != 0 && *rec.z_d_aux != 1)
      flag(0, "invalid z_d");
    if (static_cast<int>(rec.baseline.size()) !=
        static_cast<int>(schema.baseline.size())) {
      flag(0, "baseline dimension mismatch");
      continue;
    }
    for (std::size_t i = 0; i < rec.baseline.size(); ++i)
      if (!valid_covariate_value(schema.baseline[i], rec.baseline[i]))
        flag(0, "invalid covariate value (l0_" + schema.baseline[i].name + ")");
    if (static_cast<int>(rec.intervals.size()) != horizon) {
      flag(0, "interval count mismatch");
      continue;
    }

    State state = State::Alive;
    for (int t = 1; t <= horizon; ++t) {
      const IntervalEntry& e = rec.intervals[t - 1];
      auto check_flag01 = [&](std::int8_t v, const char* name) {
        if (v != 0 && v != 1)
          flag(t, std::string("invalid flag value (") + name + ")");
      };
      switch (state) {
        case State::Alive: {
          if (e.c < 0) {
            flag(t, "missing c while at risk");
            // Cannot classify further; treat as censored to limit cascade.
            state = State::Censored;
            break;
          }
          check_flag01(e.c, "c");
          if (e.c == 1) {
            if (e.r >= 0 || e.d >= 0 || e.y >= 0 || e.has_l())
              flag(t, "value after censoring");
            state = State::Censored;
            break;
          }
          if (e.r < 0) flag(t, "missing r while uncensored");
          else check_flag01(e.r, "r");
          if (e.d < 0) {
            flag(t, "missing d while uncensored");
            state = State::Censored;
            break;
          }
          check_flag01(e.d, "d");
          if (e.d == 1) {
            if (e.y == 1) flag(t, "y present despite competing event");
            if (e.has_l()) flag(t, "l present after absorption");
            state = State::Dead;
            break;
          }
          if (e.y < 0) {
            flag(t, "missing y while at risk");
            state = State::Censored;
            break;
          }
          check_flag01(e.y, "y");
          if (e.y == 1) {
            if (e.has_l()) flag(t, "l present after absorption");
            state = State::Event;
            break;
          }
          // Event-free, uncensored: time-varying covariates due for t <= K.
          if (t <= horizon - 1) {
            if (static_cast<int>(e.l.size()) !=
                static_cast<int>(schema.time_varying.size())) {
              flag(t, e.has_l() ? "l dimension mismatch"
                                : "missing l while event-free");
            } else {
              for (std::size_t i = 0; i < e.l.size(); ++i)
                if (!valid_covariate_value(schema.time_varying[i], e.l[i]))
                  flag(t, "invalid covariate value (l_" +
                              schema.time_varying[i].name + ")");
            }
          } else if (e.has_l()) {
            flag(t, "l present at terminal interval");
          }
          break;
        }
        case State::Censored: {
          if (e.c == 0) flag(t, "censoring not monotone");
          if (e.r >= 0 || e.d >= 0 || e.y >= 0 || e.has_l())
            flag(t, "value after censoring");
          break;
        }
        case State::Dead: {
          if (e.d == 0) flag(t, "competing indicator not monotone");
          if (e.y == 1) flag(t, "y present despite competing event");
          if (e.c >= 0 || e.r >= 0 || e.has_l())
            flag(t, "value after absorption");
          break;
        }
        case State::Event: {
          if (e.y == 0) flag(t, "event indicator not monotone");
          if (e.c >= 0 || e.r >= 0 || e.d >= 0 || e.has_l())
            flag(t, "value after absorption");
          break;
        }
      }
    }
  }
  return out;
}

void require_valid(const TrialDataset& data) {
  if (data.individuals.empty())
    throw validation_error("dataset contains no individuals");
  auto report = validate_monotone(data);
  if (report.empty()) return;
  std::ostringstream msg;
  msg << "dataset failed protocol validation (" << report.size()
      << " violation" << (report.size() == 1 ? "" : "s") << "):";
  std::size_t shown = 0;
  for (const auto& v : report) {
    if (shown++ == 20) {
      msg << "\n  ... (" << report.size() - 20 << " more)";
      break;
    }
    msg << "\n  id=" << v.id << " time=" << v.time << ": " << v.rule;
  }
  throw validation_error(msg.str());
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::int8_t parse_flag(const std::string& cell, const char* name, int line_no) {
  if (cell.empty()) return -1;
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  throw validation_error("line " + std::to_string(line_no) + ": column '" +
                         name + "' must be 0, 1 or empty, got '" + cell + "'");
}

double parse_value(const std::string& cell, int line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw validation_error("line " + std::to_string(line_no) +
                           ": bad numeric value '" + cell + "'");
  }
}

std::string format_value(double v) {
  if (std::nearbyint(v) == v && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct HeaderLayout {
  int id = -1, time = -1, z = -1, c = -1, r = -1, a = -1, d = -1, y = -1,
      z_d = -1;
  std::vector<int> l0;  // per schema baseline covariate
  std::vector<int> l;   // per schema time-varying covariate
};

HeaderLayout parse_header(const std::vector<std::string>& cols,
                          const CovariateSchema& schema, bool treatment) {
  HeaderLayout h;
  h.l0.assign(schema.baseline.size(), -1);
  h.l.assign(schema.time_varying.size(), -1);
  for (int i = 0; i < static_cast<int>(cols.size()); ++i) {
    const std::string& c = cols[i];
    if (c == "id") h.id = i;
    else if (c == "time") h.time = i;
    else if (c == "z") h.z = i;
    else if (c == "c") h.c = i;
    else if (c == "r") h.r = i;
    else if (c == "a") h.a = i;
    else if (c == "d") h.d = i;
    else if (c == "y") h.y = i;
    else if (c == "z_d") h.z_d = i;
    else if (c.rfind("l0_", 0) == 0) {
      int idx = schema.baseline_index(c.substr(3));
      if (idx < 0)
        throw validation_error("CSV column '" + c + "' not in schema");
      h.l0[idx] = i;
    } else if (c.rfind("l_", 0) == 0) {
      int idx = schema.time_varying_index(c.substr(2));
      if (idx < 0)
        throw validation_error("CSV column '" + c + "' not in schema");
      h.l[idx] = i;
    } else {
      throw validation_error("unrecognized CSV column '" + c + "'");
    }
  }
  auto need = [&](int idx, const char* name) {
    if (idx < 0)
      throw validation_error(std::string("missing CSV column '") + name + "'");
  };
  need(h.id, "id");
  need(h.time, "time");
  if (treatment) {
    need(h.a, "a");
    if (h.z >= 0 || h.r >= 0)
      throw validation_error(
          "treatment-centered CSV must not carry 'z'/'r' columns");
  } else {
    need(h.z, "z");
    need(h.r, "r");
  }
  need(h.c, "c");
  need(h.d, "d");
  need(h.y, "y");
  for (std::size_t i = 0; i < h.l0.size(); ++i)
    need(h.l0[i], ("l0_" + schema.baseline[i].name).c_str());
  for (std::size_t i = 0; i < h.l.size(); ++i)
    need(h.l[i], ("l_" + schema.time_varying[i].name).c_str());
  return h;
}

std::string cell_at(const std::vector<std::string>& row, int idx) {
  return idx >= 0 && idx < static_cast<int>(row.size()) ? row[idx]
                                                        : std::string();
}

// Shared row-walking driver. Calls sink(id, time, row, line_no) in file
// order after basic shape checks.
template <typename Sink>
void walk_rows(const std::string& text, int n_cols, Sink&& sink) {
  std::istringstream in(text);
  std::string line;
  int line_no = 1;  // header consumed by caller
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto row = split_csv_line(line);
    if (static_cast<int>(row.size()) != n_cols)
      throw validation_error("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(n_cols) + " cells, got " +
                             std::to_string(row.size()));
    sink(row, line_no);
  }
}

// First non-comment, non-blank line is the header; the rest is the body.
// Leading '#' lines carry provenance notes (fingerprint, seed) and are
// ignored on ingestion.
std::pair<std::string, std::string> split_header(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  for (;;) {
    if (!std::getline(in, header))
      throw validation_error("empty CSV: no header row");
    if (header.empty() || header == "\r" || header[0] == '#') continue;
    break;
  }
  auto pos = in.tellg();
  std::string body =
      pos < 0 ? std::string() : text.substr(static_cast<std::size_t>(pos));
  return {std::move(header), std::move(body)};
}

}  // namespace

TrialDataset ingest_csv_text(const std::string& text,
                             const CovariateSchema& schema,
                             const CsvOptions& opts) {
  auto [header, body] = split_header(text);
  auto cols = split_csv_line(header);
  HeaderLayout h = parse_header(cols, schema, /*treatment=*/false);

  TrialDataset data;
  data.schema = schema;
  std::map<std::string, std::size_t> index;  // id -> position
  std::vector<std::vector<bool>> seen;       // per record, per time (0-based)
  int max_time = 0;

  walk_rows(body, static_cast<int>(cols.size()), [&](const auto& row,
                                                     int line_no) {
    std::string id = cell_at(row, h.id);
    if (id.empty())
      throw validation_error("line " + std::to_string(line_no) + ": empty id");
    int time = static_cast<int>(parse_value(cell_at(row, h.time), line_no));
    if (time < 0 || (time == 0 && !opts.baseline_row))
      throw validation_error("line " + std::to_string(line_no) +
                             ": bad time index " + std::to_string(time));
    auto [it, inserted] = index.try_emplace(id, data.individuals.size());
    if (inserted) {
      data.individuals.emplace_back();
      data.individuals.back().id = id;
      data.individuals.back().z = -1;
      data.individuals.back().baseline.assign(schema.baseline.size(),
                                              std::nan(""));
      seen.emplace_back();
    }
    IndividualRecord& rec = data.individuals[it->second];
    std::vector<bool>& times = seen[it->second];
    if (static_cast<int>(times.size()) < time + 1) times.resize(time + 1, false);
    if (times[time])
      throw validation_error("line " + std::to_string(line_no) +
                             ": duplicate (id,time) = (" + id + "," +
                             std::to_string(time) + ")");
    times[time] = true;
    max_time = std::max(max_time, time);

    // Baseline covariates: on the time-0 row, or repeated on every row.
    bool baseline_here =
        opts.baseline_row ? (time == 0) : true;
    if (baseline_here) {
      for (std::size_t i = 0; i < h.l0.size(); ++i) {
        std::string cell = cell_at(row, h.l0[i]);
        if (cell.empty()) {
          if (opts.baseline_row && time == 0)
            throw validation_error("line " + std::to_string(line_no) +
                                   ": missing baseline covariate l0_" +
                                   schema.baseline[i].name);
          continue;
        }
        double v = parse_value(cell, line_no);
        if (std::isnan(rec.baseline[i])) {
          rec.baseline[i] = v;
        } else if (rec.baseline[i] != v) {
          throw validation_error("line " + std::to_string(line_no) +
                                 ": baseline covariate l0_" +
                                 schema.baseline[i].name +
                                 " not constant within id " + id);
        }
      }
    }
    std::string zc = cell_at(row, h.z);
    if (!zc.empty()) {
      int zv = parse_flag(zc, "z", line_no);
      if (rec.z == -1) rec.z = zv;
      else if (rec.z != zv)
        throw validation_error("line " + std::to_string(line_no) +
                               ": z not constant within id " + id);
    }
    if (h.z_d >= 0) {
      std::string zd = cell_at(row, h.z_d);
      if (!zd.empty()) {
        int v = parse_flag(zd, "z_d", line_no);
        if (!rec.z_d_aux) rec.z_d_aux = v;
        else if (*rec.z_d_aux != v)
          throw validation_error("line " + std::to_string(line_no) +
                                 ": z_d not constant within id " + id);
      }
    }
    if (time == 0) return;  // baseline-only row

    if (static_cast<int>(rec.intervals.size()) < time)
      rec.intervals.resize(time);
    IntervalEntry& e = rec.intervals[time - 1];
    e.c = parse_flag(cell_at(row, h.c), "c", line_no);
    e.r = parse_flag(cell_at(row, h.r), "r", line_no);
    e.d = parse_flag(cell_at(row, h.d), "d", line_no);
    e.y = parse_flag(cell_at(row, h.y), "y", line_no);
    bool any_l = false, all_l = true;
    std::vector<double> l(h.l.size(), 0.0);
    for (std::size_t i = 0; i < h.l.size(); ++i) {
      std::string cell = cell_at(row, h.l[i]);
      if (cell.empty()) all_l = false;
      else {
        any_l = true;
        l[i] = parse_value(cell, line_no);
      }
    }
    if (any_l && !all_l)
      throw validation_error("line " + std::to_string(line_no) +
                             ": partial time-varying covariate row");
    if (any_l) e.l = std::move(l);
  });

  if (data.individuals.empty())
    throw validation_error("CSV contains a header but no data rows");
  data.horizon = max_time;
  for (auto& rec : data.individuals) {
    if (rec.z == -1)
      throw validation_error("id " + rec.id + ": no z value on any row");
    for (std::size_t i = 0; i < rec.baseline.size(); ++i)
      if (std::isnan(rec.baseline[i]))
        throw validation_error("id " + rec.id + ": baseline covariate l0_" +
                               schema.baseline[i].name + " never given");
    rec.intervals.resize(data.horizon);
    // Normalize absorbed tails: drop carried c=1 markers into the canonical
    // absent form only where they are redundant; validation still enforces
    // the pattern. (Post-censoring c=1 is accepted and normalized here.)
    bool censored = false;
    for (auto& e : rec.intervals) {
      if (censored && e.c == 1 && e.r < 0 && e.d < 0 && e.y < 0 && !e.has_l())
        e.c = -1;
      if (e.c == 1) censored = true;
    }
  }
  require_valid(data);
  return data;
}

TrialDataset ingest_csv(const std::string& path, const CovariateSchema& schema,
                        const CsvOptions& opts) {
  return ingest_csv_text(read_file(path), schema, opts);
}

namespace {

void append_header(std::ostringstream& out, const CovariateSchema& schema,
                   bool treatment, bool with_zd) {
  out << "id,time";
  out << (treatment ? ",a" : ",z");
  out << ",c";
  if (!treatment) out << ",r";
  out << ",d,y";
  if (with_zd) out << ",z_d";
  for (const auto& c : schema.baseline) out << ",l0_" << c.name;
  for (const auto& c : schema.time_varying) out << ",l_" << c.name;
  out << "\n";
}

std::string flag_str(std::int8_t v) {
  return v < 0 ? std::string() : std::to_string(static_cast<int>(v));
}

}  // namespace

std::string dataset_to_csv(const TrialDataset& data, const CsvOptions& opts) {
  bool with_zd = false;
  for (const auto& r : data.individuals)
    if (r.z_d_aux) with_zd = true;
  std::ostringstream out;
  append_header(out, data.schema, /*treatment=*/false, with_zd);
  for (const auto& rec : data.individuals) {
    std::string zd = rec.z_d_aux ? std::to_string(*rec.z_d_aux) : std::string();
    auto baseline_cells = [&](bool include) {
      std::string s;
      for (double v : rec.baseline)
        s += "," + (include ? format_value(v) : std::string());
      return s;
    };
    if (opts.baseline_row) {
      out << rec.id << ",0," << rec.z << ",,,,";
      if (with_zd) out << "," << zd;
      out << baseline_cells(true);
      for (std::size_t i = 0; i < data.schema.time_varying.size(); ++i)
        out << ",";
      out << "\n";
    }
    int last = std::min(data.horizon, static_cast<int>(rec.intervals.size()));
    for (int t = 1; t <= last; ++t) {
      const IntervalEntry& e = rec.intervals[t - 1];
      out << rec.id << "," << t << "," << rec.z << "," << flag_str(e.c) << ","
          << flag_str(e.r) << "," << flag_str(e.d) << "," << flag_str(e.y);
      if (with_zd) out << "," << zd;
      out << baseline_cells(!opts.baseline_row);
      for (std::size_t i = 0; i < data.schema.time_varying.size(); ++i) {
        out << ",";
        if (e.has_l()) out << format_value(e.l[i]);
      }
      out << "\n";
    }
  }
  return out.str();
}

void write_csv(const TrialDataset& data, const std::string& path,
               const CsvOptions& opts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write file: " + path);
  out << dataset_to_csv(data, opts);
}

std::vector<TreatmentCenteredRecord> ingest_treatment_csv_text(
    const std::string& text, const CovariateSchema& schema,
    const CsvOptions& opts) {
  auto [header, body] = split_header(text);
  auto cols = split_csv_line(header);
  HeaderLayout h = parse_header(cols, schema, /*treatment=*/true);

  std::vector<TreatmentCenteredRecord> recs;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<bool>> seen;
  int max_time = 0;
  walk_rows(body, static_cast<int>(cols.size()), [&](const auto& row,
                                                     int line_no) {
    std::string id = cell_at(row, h.id);
    if (id.empty())
      throw validation_error("line " + std::to_string(line_no) + ": empty id");
    int time = static_cast<int>(parse_value(cell_at(row, h.time), line_no));
    if (time < 0 || (time == 0 && !opts.baseline_row))
      throw validation_error("line " + std::to_string(line_no) +
                             ": bad time index " + std::to_string(time));
    auto [it, inserted] = index.try_emplace(id, recs.size());
    if (inserted) {
      recs.emplace_back();
      recs.back().id = id;
      recs.back().baseline.assign(schema.baseline.size(), std::nan(""));
      seen.emplace_back();
    }
    TreatmentCenteredRecord& rec = recs[it->second];
    auto& times = seen[it->second];
    if (static_cast<int>(times.size()) < time + 1) times.resize(time + 1, false);
    if (times[time])
      throw validation_error("line " + std::to_string(line_no) +
                             ": duplicate (id,time)");
    times[time] = true;
    max_time = std::max(max_time, time);
    bool baseline_here = opts.baseline_row ? (time == 0) : true;
    if (baseline_here) {
      for (std::size_t i = 0; i < h.l0.size(); ++i) {
        std::string cell = cell_at(row, h.l0[i]);
        if (cell.empty()) continue;
        double v = parse_value(cell, line_no);
        if (std::isnan(rec.baseline[i])) rec.baseline[i] = v;
        else if (rec.baseline[i] != v)
          throw validation_error("line " + std::to_string(line_no) +
                                 ": baseline covariate not constant");
      }
    }
    if (time == 0) return;
    if (static_cast<int>(rec.intervals.size()) < time) rec.intervals.resize(time);
    auto& e = rec.intervals[time - 1];
    e.c = parse_flag(cell_at(row, h.c), "c", line_no);
    e.a = parse_flag(cell_at(row, h.a), "a", line_no);
    e.d = parse_flag(cell_at(row, h.d), "d", line_no);
    e.y = parse_flag(cell_at(row, h.y), "y", line_no);
    bool any_l = false, all_l = true;
    std::vector<double> l(h.l.size(), 0.0);
    for (std::size_t i = 0; i < h.l.size(); ++i) {
      std::string cell = cell_at(row, h.l[i]);
      if (cell.empty()) all_l = false;
      else {
        any_l = true;
        l[i] = parse_value(cell, line_no);
      }
    }
    if (any_l && !all_l)
      throw validation_error("line " + std::to_string(line_no) +
                             ": partial time-varying covariate row");
    if (any_l) e.l = std::move(l);
  });
  for (auto& rec : recs) rec.intervals.resize(max_time);
  return recs;
}

std::vector<TreatmentCenteredRecord> ingest_treatment_csv(
    const std::string& path, const CovariateSchema& schema,
    const CsvOptions& opts) {
  return ingest_treatment_csv_text(read_file(path), schema, opts);
}

std::string treatment_to_csv(const std::vector<TreatmentCenteredRecord>& recs,
                             const CovariateSchema& schema, int horizon,
                             const CsvOptions& opts) {
  std::ostringstream out;
  append_header(out, schema, /*treatment=*/true, /*with_zd=*/false);
  for (const auto& rec : recs) {
    auto baseline_cells = [&](bool include) {
      std::string s;
      for (double v : rec.baseline)
        s += "," + (include ? format_value(v) : std::string());
      return s;
    };
    if (opts.baseline_row) {
      out << rec.id << ",0,,,,";
      out << baseline_cells(true);
      for (std::size_t i = 0; i < schema.time_varying.size(); ++i) out << ",";
      out << "\n";
    }
    for (int t = 1; t <= horizon; ++t) {
      const auto& e = rec.intervals[t - 1];
      out << rec.id << "," << t << "," << flag_str(e.a) << "," << flag_str(e.c)
          << "," << flag_str(e.d) << "," << flag_str(e.y);
      out << baseline_cells(!opts.baseline_row);
      for (std::size_t i = 0; i < schema.time_varying.size(); ++i) {
        out << ",";
        if (!e.l.empty()) out << format_value(e.l[i]);
      }
      out << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Encoding conversion

TrialDataset encode_strategy_centered(
    const std::vector<TreatmentCenteredRecord>& records,
    const CovariateSchema& schema, int horizon) {
  TrialDataset data;
  data.schema = schema;
  data.horizon = horizon;
  data.individuals.reserve(records.size());
  for (const auto& src : records) {
    IndividualRecord rec;
    rec.id = src.id;
    rec.baseline = src.baseline;
    rec.intervals.resize(horizon);
    if (src.intervals.empty() || src.intervals[0].a < 0)
      throw validation_error("id " + src.id +
                             ": a_1 absent; initiated treatment undefined");
    rec.z = src.intervals[0].a;
    for (int t = 1; t <= horizon && t <= static_cast<int>(src.intervals.size());
         ++t) {
      const auto& e = src.intervals[t - 1];
      IntervalEntry& o = rec.intervals[t - 1];
      o.c = e.c;
      o.d = e.d;
      o.y = e.y;
      o.l = e.l;
      if (e.a >= 0) o.r = (e.a == rec.z) ? 1 : 0;
    }
    data.individuals.push_back(std::move(rec));
  }
  require_valid(data);
  return data;
}

std::vector<TreatmentCenteredRecord> to_treatment_centered(
    const TrialDataset& data) {
  std::vector<TreatmentCenteredRecord> out;
  out.reserve(data.individuals.size());
  for (const auto& rec : data.individuals) {
    if (rec.z_d_aux)
      throw validation_error(
          "four-arm records have no single-treatment encoding");
    TreatmentCenteredRecord t;
    t.id = rec.id;
    t.baseline = rec.baseline;
    t.intervals.resize(rec.intervals.size());
    for (std::size_t k = 0; k < rec.intervals.size(); ++k) {
      const auto& e = rec.intervals[k];
      auto& o = t.intervals[k];
      o.c = e.c;
      o.d = e.d;
      o.y = e.y;
      o.l = e.l;
      if (e.r >= 0) o.a = e.r == 1 ? rec.z : 1 - rec.z;
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Risk sets and trajectories

std::vector<Trajectory> make_trajectories(const TrialDataset& data) {
  std::vector<Trajectory> out;
  out.reserve(data.individuals.size());
  const int horizon = data.horizon;
  const int never = horizon + 1;
  for (const auto& rec : data.individuals) {
    Trajectory tr;
    tr.z = rec.z;
    tr.z_d_aux = rec.z_d_aux.value_or(-1);
    tr.horizon = horizon;
    tr.first_c = tr.first_r0 = tr.first_d = tr.first_y = never;
    tr.baseline = rec.baseline;
    tr.l_values.assign(horizon, {});
    tr.l_values[0] = rec.baseline;
    int last = std::min(horizon, static_cast<int>(rec.intervals.size()));
    for (int t = 1; t <= last; ++t) {
      const IntervalEntry& e = rec.intervals[t - 1];
      if (e.c == 1 && tr.first_c == never) tr.first_c = t;
      if (tr.first_r0 == never) {
        if (e.r == 0) tr.first_r0 = t;
        // Absent r marks exit from the observable frame; adherence queries
        // beyond this point must come back false.
        else if (e.r < 0 && e.c != 0) tr.first_r0 = t;
      }
      if (e.d == 1 && tr.first_d == never) tr.first_d = t;
      if (e.y == 1 && tr.first_y == never) tr.first_y = t;
      if (t <= horizon - 1 && e.has_l()) {
        if (t >= static_cast<int>(tr.l_values.size()))
          tr.l_values.resize(t + 1);
        tr.l_values[t] = e.l;
      }
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<RiskSetEntry> risk_set(const TrialDataset& data,
                                   const RiskSetFilter& filter,
                                   const std::vector<FlagConstraint>& extra) {
  if (filter.time > data.horizon)
    throw config_error("risk-set time exceeds horizon");
  auto trajs = make_trajectories(data);
  std::vector<RiskSetEntry> out;
  for (int i = 0; i < static_cast<int>(trajs.size()); ++i) {
    const Trajectory& tr = trajs[i];
    if (filter.z >= 0 && tr.z != filter.z) continue;
    if (filter.require_uncensored && !tr.uncensored_through(filter.time))
      continue;
    if (filter.require_adherent && !tr.adherent_through(filter.time)) continue;
    bool ok = true;
    for (const auto& c : extra) {
      const IntervalEntry* e =
          c.time >= 1 && c.time <= data.horizon
              ? &data.individuals[i].intervals[c.time - 1]
              : nullptr;
      int v;
      switch (c.field) {
        case 'c': v = c.time == 0 ? 0 : (e ? e->c : -1); break;
        case 'r': v = e ? e->r : -1; break;
        case 'd': v = c.time == 0 ? 0 : tr.d_at(c.time); break;
        case 'y': v = c.time == 0 ? 0 : tr.y_at(c.time); break;
        default:
          throw config_error("unknown risk-set constraint field");
      }
      if (v != c.value) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back({i, filter.time});
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    return data.individuals[a.record_index].id <
           data.individuals[b.record_index].id;
  });
  return out;
}

}  // namespace sepeff
