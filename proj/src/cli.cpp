// Command-line front door. Every subcommand reads declarative inputs, runs
// one pipeline stage, writes machine-readable artifacts into --out, and
// prints a short human summary. Errors leave as JSON on stderr with the exit
// code encoding the failure class.
#include "sepeff/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sepeff/data.hpp"
#include "sepeff/graph.hpp"
#include "sepeff/inference.hpp"
#include "sepeff/models.hpp"
#include "sepeff/simulation.hpp"

namespace sepeff {

using json = nlohmann::json;

namespace {

void write_text(const std::string& dir, const std::string& name,
                const std::string& text) {
  std::filesystem::create_directories(dir);
  std::string path = dir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write file: " + path);
  out << text;
}

// Every artifact embeds the config fingerprint and seed so a run can be
// traced back to its inputs: JSON as fields, CSV/dot as a comment line the
// ingesters skip.
std::string stamp_comment(const RunConfig& cfg, const char* lead = "#") {
  return std::string(lead) + " fingerprint=" + hex64(cfg.fingerprint()) +
         " seed=" + std::to_string(cfg.seed) + "\n";
}

void stamp(json& j, const RunConfig& cfg) {
  j["fingerprint"] = hex64(cfg.fingerprint());
  j["seed"] = cfg.seed;
}

ArmPair parse_arm(const std::string& text) {
  // "zy,zd" with both in {0,1}.
  auto comma = text.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 >= text.size())
    throw config_error("arm must look like \"1,0\" (z_y,z_d)");
  auto bit = [&](const std::string& s) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw config_error("arm components must be 0 or 1, got '" + s + "'");
  };
  return ArmPair{bit(text.substr(0, comma)), bit(text.substr(comma + 1))};
}

std::vector<int> parse_node_list(const Dag& g, const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    int v = g.find_by_name(item);
    if (v < 0) throw config_error("unknown graph node '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> node_names(const Dag& g, const std::vector<int>& vs) {
  std::vector<std::string> out;
  for (int v : vs) out.push_back(g.label(v).display());
  return out;
}

// Shared state for data-driven subcommands.
struct Loaded {
  TrialDataset data;
  std::vector<Trajectory> trajs;
  NuisanceSpec spec;
};

Loaded load_inputs(const RunConfig& cfg, const CsvOptions& csv_opts) {
  if (cfg.data_path.empty()) throw config_error("--data is required");
  if (cfg.schema_path.empty()) throw config_error("--schema is required");
  Loaded loaded;
  CovariateSchema schema = schema_from_json_file(cfg.schema_path);
  loaded.data = ingest_csv(cfg.data_path, schema, csv_opts);
  require_valid(loaded.data);
  loaded.trajs = make_trajectories(loaded.data);
  loaded.spec = cfg.models_path.empty()
                    ? NuisanceSpec::saturated_default()
                    : NuisanceSpec::from_json_file(cfg.models_path, schema);
  return loaded;
}

EstimateReport run_estimator(const Loaded& loaded, EstimatorKind kind,
                             ArmPair arm, const std::vector<double>& weights,
                             const NuisanceSet& fits) {
  EstimatorInputs in;
  in.trajs = &loaded.trajs;
  in.weights = weights.empty() ? nullptr : &weights;
  in.fits = &fits;
  in.horizon = loaded.data.horizon;
  switch (kind) {
    case EstimatorKind::PlugIn:
      return plug_in_from_fits(in, arm);
    case EstimatorKind::WeightedY:
      return weighted_from_fits(in, arm, 'Y');
    case EstimatorKind::WeightedD:
      return weighted_from_fits(in, arm, 'D');
    case EstimatorKind::OneStep:
      return one_step_from_fits(in, arm);
  }
  throw config_error("unknown estimator kind");
}

// Point estimate plus optional bootstrap for one arm. The statistic returns
// the whole risk curve so the interval covers every horizon.
EstimateReport estimate_arm(const Loaded& loaded, const RunConfig& cfg,
                            EstimatorKind kind, ArmPair arm, int draws,
                            double level) {
  NuisanceSet fits = fit_nuisance_set(loaded.trajs, loaded.data.schema,
                                      loaded.data.horizon, loaded.spec, kind);
  EstimateReport report = run_estimator(loaded, kind, arm, {}, fits);
  report.fingerprint = hex64(cfg.fingerprint()) + "-s" +
                       std::to_string(cfg.seed);
  if (draws <= 0) return report;

  auto statistic = [&](const std::vector<double>& w) {
    NuisanceSet refit =
        fit_nuisance_set(loaded.trajs, loaded.data.schema,
                         loaded.data.horizon, loaded.spec, kind, w);
    return run_estimator(loaded, kind, arm, w, refit).curve;
  };
  BootstrapConfig bc;
  bc.draws = draws;
  bc.level = level;
  bc.seed = cfg.seed;
  bc.threads = std::max(cfg.threads, 1);
  BootstrapResult boot =
      bootstrap_ci(static_cast<int>(loaded.trajs.size()), statistic, bc);
  report.lower = boot.lower;
  report.upper = boot.upper;
  report.replicates.assign(static_cast<size_t>(draws),
                           std::numeric_limits<double>::quiet_NaN());
  for (size_t b = 0; b < boot.replicates.size(); ++b)
    if (!boot.replicates[b].empty())
      report.replicates[b] = boot.replicates[b].back();
  return report;
}

json dcc_to_json(const Dag& g, const DccReport& report) {
  json out;
  out["all_pass"] = report.all_pass;
  out["items"] = json::array();
  for (const DccItem& item : report.items) {
    json j;
    j["k"] = item.k;
    j["condition"] = item.condition;
    j["pass"] = item.pass;
    j["vacuous"] = item.vacuous;
    j["description"] = item.description;
    if (!item.witness.empty()) j["witness"] = node_names(g, item.witness);
    out["items"].push_back(j);
  }
  return out;
}

int run(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"sustained separable-effect estimation for longitudinal trials",
               "sepeff"};
  app.require_subcommand(1);
  app.add_option("--seed", cfg.seed, "random seed for anything stochastic");
  app.add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
  app.add_option("--out", cfg.out_dir, "artifact output directory");

  CsvOptions csv_opts;
  bool baseline_row = false;

  // validate ----------------------------------------------------------------
  auto* validate = app.add_subcommand(
      "validate", "check a dataset against the schema and conventions");
  validate->add_option("--data", cfg.data_path, "long-format CSV")
      ->required()
      ->check(CLI::ExistingFile);
  validate->add_option("--schema", cfg.schema_path, "covariate schema JSON")
      ->required()
      ->check(CLI::ExistingFile);
  validate->add_flag("--baseline-row", baseline_row,
                     "baseline covariates live on a time-0 row");

  // graph -------------------------------------------------------------------
  auto* graph = app.add_subcommand("graph", "causal graph utilities");
  graph->require_subcommand(1);

  auto* convert = graph->add_subcommand(
      "convert", "treatment-centered graph to strategy-centered");
  convert->add_option("--graph,--in", cfg.graph_path, "graph JSON")
      ->required()
      ->check(CLI::ExistingFile);

  std::string x_csv, y_csv, given_csv, swig_csv;
  auto* dsep = graph->add_subcommand("dsep", "d-separation query");
  dsep->add_option("--graph", cfg.graph_path, "graph JSON")
      ->required()
      ->check(CLI::ExistingFile);
  dsep->add_option("--x", x_csv, "comma-separated node names")->required();
  dsep->add_option("--y", y_csv, "comma-separated node names")->required();
  dsep->add_option("--given", given_csv, "conditioning node names");
  dsep->add_option("--intervene", swig_csv,
                   "SWIG interventions, e.g. C1=0,R1=1");

  std::string dcc_form = "strategy";
  auto* dcc = graph->add_subcommand(
      "check-dcc", "dismissible-component conditions for all k");
  dcc->add_option("--graph", cfg.graph_path, "graph JSON")
      ->required()
      ->check(CLI::ExistingFile);
  dcc->add_option("--form", dcc_form, "strategy or treatment");

  // fit ---------------------------------------------------------------------
  std::string fit_for = "one-step";
  auto* fit = app.add_subcommand("fit", "fit the nuisance models");
  fit->add_option("--data", cfg.data_path, "long-format CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--schema", cfg.schema_path, "covariate schema JSON")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--models", cfg.models_path,
                  "model spec JSON (default: saturated)")
      ->check(CLI::ExistingFile);
  fit->add_option("--for", fit_for, "estimator the fit must support");
  fit->add_flag("--baseline-row", baseline_row,
                "baseline covariates live on a time-0 row");

  // estimate ------------------------------------------------------------
  std::string est_name = "one-step";
  std::vector<std::string> arm_texts;
  int draws = 0;
  double level = 0.95;
  auto* estimate = app.add_subcommand(
      "estimate", "counterfactual risk curves for treatment arms");
  estimate->add_option("--data", cfg.data_path, "long-format CSV")->required();
  estimate->add_option("--schema", cfg.schema_path, "covariate schema JSON")
      ->required();
  estimate->add_option("--models", cfg.models_path,
                       "model spec JSON (default: saturated)");
  estimate->add_option("--estimator", est_name,
                       "plug-in | weighted-y | weighted-d | one-step");
  estimate->add_option("--arm", arm_texts,
                       "arm as \"z_y,z_d\" (repeatable; default all four)");
  estimate->add_option("--bootstrap", draws, "bootstrap draws (0 = none)");
  estimate->add_option("--level", level, "confidence level");
  estimate->add_flag("--baseline-row", baseline_row,
                     "baseline covariates live on a time-0 row");

  // contrast ------------------------------------------------------------
  std::string effect_name = "zy_at_zd";
  int fix_component = 1;
  auto* contrast = app.add_subcommand(
      "contrast", "separable effect of one component with the other fixed");
  contrast->add_option("--data", cfg.data_path, "long-format CSV")->required();
  contrast->add_option("--schema", cfg.schema_path, "covariate schema JSON")
      ->required();
  contrast->add_option("--models", cfg.models_path,
                       "model spec JSON (default: saturated)");
  contrast->add_option("--estimator", est_name,
                       "plug-in | weighted-y | weighted-d | one-step");
  contrast->add_option("--effect", effect_name, "zy_at_zd or zd_at_zy");
  contrast->add_option("--fix", fix_component,
                       "value of the fixed component (0 or 1)");
  contrast->add_option("--bootstrap", draws, "bootstrap draws (0 = none)");
  contrast->add_option("--level", level, "confidence level");
  contrast->add_flag("--baseline-row", baseline_row,
                     "baseline covariates live on a time-0 row");

  // simulate / truth / coverage -------------------------------------------
  int sim_n = 1000;
  std::string sim_mode = "two-arm";
  auto* simulate = app.add_subcommand("simulate", "sample a trial dataset");
  simulate->add_option("--dgp", cfg.dgp_path, "process spec JSON")->required();
  simulate->add_option("--n", sim_n, "individuals");
  simulate->add_option("--mode", sim_mode, "two-arm or four-arm");

  auto* truth = app.add_subcommand(
      "truth", "exact counterfactual risks of a process by enumeration");
  truth->add_option("--dgp", cfg.dgp_path, "process spec JSON")->required();

  auto* coverage = app.add_subcommand(
      "coverage", "replicated coverage experiment from a scenario");
  coverage->add_option("--scenario", cfg.scenario_path, "scenario JSON")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  csv_opts.baseline_row = baseline_row;

  // ---------------------------------------------------------------------
  if (*validate) {
    cfg.command = "validate";
    CovariateSchema schema = schema_from_json_file(cfg.schema_path);
    TrialDataset data = ingest_csv(cfg.data_path, schema, csv_opts);
    require_valid(data);
    json out;
    out["ok"] = true;
    out["individuals"] = data.individuals.size();
    out["horizon"] = data.horizon;
    out["fingerprint"] = hex64(cfg.fingerprint());
    write_text(cfg.out_dir, "validate.json", out.dump(2));
    std::cout << "ok: " << data.individuals.size() << " individuals over "
              << data.horizon << " intervals\n";
    return 0;
  }

  if (*convert) {
    cfg.command = "graph-convert";
    Dag g = Dag::from_json_file(cfg.graph_path);
    if (!g.find_all(NodeRole::A).empty()) g = split_plain_treatment(g);
    Dag strategy = convert_to_strategy_centered(g);
    write_text(cfg.out_dir, "strategy_graph.json", strategy.to_json_text());
    write_text(cfg.out_dir, "strategy_graph.dot", strategy.to_dot());
    std::cout << "converted: " << strategy.num_nodes() << " nodes\n";
    return 0;
  }

  if (*dsep) {
    cfg.command = "graph-dsep";
    Dag g = Dag::from_json_file(cfg.graph_path);
    std::vector<int> x = parse_node_list(g, x_csv);
    std::vector<int> y = parse_node_list(g, y_csv);
    std::vector<int> cond = parse_node_list(g, given_csv);
    json out;
    bool sep;
    std::optional<std::vector<int>> trail;
    if (!swig_csv.empty()) {
      std::vector<std::pair<int, int>> interventions;
      std::stringstream ss(swig_csv);
      std::string item;
      while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
          throw config_error("interventions look like NODE=value");
        int v = g.find_by_name(item.substr(0, eq));
        if (v < 0)
          throw config_error("unknown graph node '" + item.substr(0, eq) +
                             "'");
        interventions.emplace_back(v, std::stoi(item.substr(eq + 1)));
      }
      Swig swig = build_swig(g, interventions);
      sep = d_separated(swig, x, y, cond);
      if (!sep) trail = find_open_trail(swig, x, y, cond);
      if (trail) out["trail"] = node_names(swig.graph, *trail);
    } else {
      sep = d_separated(g, x, y, cond);
      if (!sep) trail = find_open_trail(g, x, y, cond);
      if (trail) out["trail"] = node_names(g, *trail);
    }
    out["d_separated"] = sep;
    write_text(cfg.out_dir, "dsep.json", out.dump(2));
    std::cout << (sep ? "d-separated" : "d-connected") << "\n";
    return 0;
  }

  if (*dcc) {
    cfg.command = "graph-check-dcc";
    Dag g = Dag::from_json_file(cfg.graph_path);
    DccPartition partition = DccPartition::from_roles(g);
    DccReport report;
    json out;
    if (dcc_form == "strategy") {
      report = check_dcc(g, partition, g.K());
      IsolationResult iso_y = check_partial_isolation(g, NodeRole::Z_Y);
      IsolationResult iso_d = check_partial_isolation(g, NodeRole::Z_D);
      out["isolation"]["z_y"] = iso_y.holds;
      out["isolation"]["z_d"] = iso_d.holds;
    } else if (dcc_form == "treatment") {
      report = check_dcc_treatment(g, partition, g.K());
    } else {
      throw config_error("--form must be strategy or treatment");
    }
    json dcc_json = dcc_to_json(g, report);
    for (auto& [key, value] : dcc_json.items()) out[key] = value;
    write_text(cfg.out_dir, "dcc.json", out.dump(2));
    std::cout << (report.all_pass ? "all conditions hold"
                                  : "conditions violated")
              << " (" << report.items.size() << " checks)\n";
    return report.all_pass ? 0 : 4;
  }

  if (*fit) {
    cfg.command = "fit";
    Loaded loaded = load_inputs(cfg, csv_opts);
    EstimatorKind kind = estimator_kind_from_name(fit_for);
    NuisanceSet fits = fit_nuisance_set(loaded.data, loaded.spec, kind);
    write_text(cfg.out_dir, "fits.json", fits.to_json_text());
    std::cout << "fitted nuisance models for " << estimator_kind_name(kind)
              << "\n";
    return 0;
  }

  if (*estimate) {
    cfg.command = "estimate";
    Loaded loaded = load_inputs(cfg, csv_opts);
    EstimatorKind kind = estimator_kind_from_name(est_name);
    std::vector<ArmPair> arms;
    for (const std::string& text : arm_texts) arms.push_back(parse_arm(text));
    if (arms.empty()) arms = all_arms();

    std::vector<EstimateReport> reports;
    for (ArmPair arm : arms)
      reports.push_back(estimate_arm(loaded, cfg, kind, arm, draws, level));
    json out = json::array();
    for (const EstimateReport& rep : reports)
      out.push_back(json::parse(rep.to_json_text()));
    write_text(cfg.out_dir, "estimates.json", out.dump(2));
    write_text(cfg.out_dir, "curves.csv", emit_curves(reports));
    for (const EstimateReport& rep : reports) {
      std::cout << rep.estimator << " " << rep.arm.label()
                << " terminal risk " << rep.terminal;
      if (!rep.lower.empty())
        std::cout << " [" << rep.lower.back() << ", " << rep.upper.back()
                  << "]";
      std::cout << "\n";
    }
    return 0;
  }

  if (*contrast) {
    cfg.command = "contrast";
    Loaded loaded = load_inputs(cfg, csv_opts);
    EstimatorKind kind = estimator_kind_from_name(est_name);
    if (fix_component != 0 && fix_component != 1)
      throw config_error("--fix must be 0 or 1");
    EffectKind effect;
    if (effect_name == "zy_at_zd") effect = EffectKind::ZYatZD;
    else if (effect_name == "zd_at_zy") effect = EffectKind::ZDatZY;
    else throw config_error("--effect must be zy_at_zd or zd_at_zy");

    // All four arms share the bootstrap stream, so any two contrast by
    // replicate; the report table mirrors the usual four-row layout.
    std::vector<EstimateReport> reports;
    for (ArmPair arm : all_arms())
      reports.push_back(estimate_arm(loaded, cfg, kind, arm, draws, level));
    auto find_report = [&](ArmPair arm) -> const EstimateReport& {
      for (const EstimateReport& rep : reports)
        if (rep.arm == arm) return rep;
      throw config_error("arm missing from the report set");
    };
    ArmPair arm_a = effect == EffectKind::ZYatZD
                        ? ArmPair{1, fix_component}
                        : ArmPair{fix_component, 1};
    ArmPair arm_b = effect == EffectKind::ZYatZD
                        ? ArmPair{0, fix_component}
                        : ArmPair{fix_component, 0};
    ContrastReport result =
        separable_effect_contrast(find_report(arm_a), find_report(arm_b),
                                  effect);
    write_text(cfg.out_dir, "contrast.json", result.to_json_text());
    write_text(cfg.out_dir, "contrast_table.csv",
               ContrastReport::table_csv(reports, result));
    std::cout << effect_kind_name(effect) << " " << result.estimator << " "
              << result.point;
    if (result.has_interval)
      std::cout << " [" << result.lower << ", " << result.upper << "]";
    std::cout << "\n";
    return 0;
  }

  if (*simulate) {
    cfg.command = "simulate";
    DgpSpec dgp = DgpSpec::from_json_file(cfg.dgp_path);
    SamplingMode mode;
    if (sim_mode == "two-arm") mode = SamplingMode::TwoArm;
    else if (sim_mode == "four-arm") mode = SamplingMode::FourArm;
    else throw config_error("--mode must be two-arm or four-arm");
    TrialDataset data = sample_trial(dgp, sim_n, cfg.seed, mode);
    std::filesystem::create_directories(cfg.out_dir);
    write_csv(data, cfg.out_dir + "/simulated.csv");
    write_text(cfg.out_dir, "simulated_schema.json",
               schema_to_json_text(data.schema));
    json meta;
    meta["n"] = sim_n;
    meta["seed"] = cfg.seed;
    meta["mode"] = sim_mode;
    meta["dgp"] = dgp.name;
    meta["fingerprint"] = hex64(cfg.fingerprint());
    write_text(cfg.out_dir, "simulate.json", meta.dump(2));
    std::cout << "sampled " << sim_n << " individuals from '" << dgp.name
              << "'\n";
    return 0;
  }

  if (*truth) {
    cfg.command = "truth";
    DgpSpec dgp = DgpSpec::from_json_file(cfg.dgp_path);
    json out;
    out["dgp"] = dgp.name;
    for (ArmPair arm : all_arms()) {
      RiskCurve curve = exact_truth(dgp, arm);
      json entry;
      entry["curve"] = curve.values;
      entry["terminal"] = curve.terminal();
      out["arms"][arm.label()] = entry;
      std::cout << arm.label() << " terminal risk " << curve.terminal()
                << "\n";
    }
    write_text(cfg.out_dir, "truth.json", out.dump(2));
    return 0;
  }

  if (*coverage) {
    cfg.command = "coverage";
    Scenario scenario = Scenario::from_json_file(cfg.scenario_path);
    if (app.count("--seed") > 0) scenario.seed = cfg.seed;
    if (app.count("--threads") > 0) scenario.threads = cfg.threads;
    CoverageTable table = run_coverage_experiment(scenario);
    write_text(cfg.out_dir, "coverage.csv", table.to_csv());
    json out;
    out["truth"] = table.truth;
    out["cells"] = json::array();
    for (const CoverageCell& cell : table.cells) {
      json j;
      j["estimator"] = estimator_kind_name(cell.estimator);
      j["arm"] = cell.arm.label();
      j["coverage"] = cell.coverage;
      j["mc_se"] = cell.mc_se;
      j["successes"] = cell.successes;
      j["failures"] = cell.failures;
      out["cells"].push_back(j);
      std::cout << estimator_kind_name(cell.estimator) << " "
                << cell.arm.label() << " coverage " << cell.coverage << " ("
                << cell.successes << " ok, " << cell.failures << " failed)\n";
    }
    write_text(cfg.out_dir, "coverage.json", out.dump(2));
    return 0;
  }

  throw config_error("no subcommand selected");
}

}  // namespace

std::uint64_t RunConfig::fingerprint() const {
  std::string blob = command + "|" + data_path + "|" + schema_path + "|" +
                     models_path + "|" + graph_path + "|" + dgp_path + "|" +
                     scenario_path + "|" + std::to_string(seed) + "|" +
                     std::to_string(threads);
  return fnv1a(blob);
}

std::string emit_curves(const std::vector<EstimateReport>& reports) {
  std::ostringstream out;
  out << "arm,k,risk,lower,upper\n";
  for (const EstimateReport& rep : reports) {
    bool has_ci = rep.lower.size() == rep.curve.size() &&
                  rep.upper.size() == rep.curve.size();
    for (size_t k = 0; k < rep.curve.size(); ++k) {
      out << rep.arm.label() << "," << (k + 1) << "," << rep.curve[k] << ",";
      if (has_ci && !std::isnan(rep.lower[k]))
        out << rep.lower[k];
      out << ",";
      if (has_ci && !std::isnan(rep.upper[k]))
        out << rep.upper[k];
      out << "\n";
    }
  }
  return out.str();
}

int dispatch(int argc, const char* const* argv) {
  try {
    return run(argc, argv);
  } catch (const config_error& e) {
    std::cerr << json{{"error", {{"type", "config"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 2;
  } catch (const validation_error& e) {
    std::cerr << json{{"error",
                       {{"type", "validation"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 3;
  } catch (const positivity_error& e) {
    std::cerr << json{{"error",
                       {{"type", "positivity"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 4;
  } catch (const fit_error& e) {
    std::cerr << json{{"error", {{"type", "fit"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"type", "internal"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  }
}

}  // namespace sepeff
