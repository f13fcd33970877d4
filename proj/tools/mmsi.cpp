#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "mmsi/casestudy.hpp"
#include "mmsi/csv.hpp"
#include "mmsi/dataset.hpp"
#include "mmsi/error.hpp"
#include "mmsi/linmodels.hpp"
#include "mmsi/mmm.hpp"
#include "mmsi/report.hpp"
#include "mmsi/reproduce.hpp"
#include "mmsi/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmsi;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Schema, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!csv::trim(item).empty()) out.push_back(csv::trim(item));
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json manifest(const std::string& subcommand, json config, std::uint64_t seed, const std::vector<std::string>& outputs,
              double wall) {
  return json{{"subcommand", subcommand},
              {"config", std::move(config)},
              {"seed", seed},
              {"version", MMSI_VERSION},
              {"outputs", outputs},
              {"wall_seconds", wall}};
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::string methods;
  unsigned threads = 0;
  std::string out = "simulation.csv";
};

int cmd_simulate(const SimulateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  json cfg_json = json::parse(read_file(a.config), nullptr, false);
  if (cfg_json.is_discarded()) throw Error(ErrorCode::Schema, "'" + a.config + "' is not valid JSON");
  // A manifest from an earlier run carries its resolved configuration.
  if (cfg_json.is_object() && cfg_json.contains("subcommand") && cfg_json.contains("config"))
    cfg_json = cfg_json.at("config");
  sim::Study study = sim::parse_study(cfg_json.dump());

  if (a.reps)
    for (auto& s : study.scenarios) s.replications = *a.reps;
  if (a.seed)
    for (auto& s : study.scenarios) s.seed = *a.seed;
  if (!a.methods.empty()) {
    study.methods.clear();
    for (const auto& m : split_list(a.methods)) study.methods.push_back(sim::parse_method(m));
    study.methods_given = true;
  }
  for (const auto& s : study.scenarios) {
    s.validate();
    if (!study.methods_given) continue;
    for (sim::Method m : study.methods)
      if (!sim::supports(m, s))
        throw Error(ErrorCode::IncompatibleMethod, std::string(sim::to_string(m)) +
                                                       " needs one endpoint and disjoint subgroups");
  }

  sim::RunOptions options;
  options.threads = a.threads;
  std::vector<sim::SimResult> results;
  for (std::size_t i = 0; i < study.scenarios.size(); ++i) {
    const sim::Scenario& s = study.scenarios[i];
    std::vector<sim::Method> run_methods;
    for (sim::Method m : study.methods)
      if (sim::supports(m, s)) run_methods.push_back(m);
    results.push_back(sim::run(s, run_methods, options));
    std::fprintf(stderr, "[%zu/%zu] N=%d prop=%.2f delta=%g %s: %.1f s\n", i + 1, study.scenarios.size(), s.total_n,
                 s.prop_target, s.delta, sim::to_string(s.family), results.back().wall_seconds);
  }

  std::ostringstream csv_text;
  sim::write_csv(csv_text, results, study.methods);
  write_file(a.out, csv_text.str());
  const std::string manifest_path = a.out + ".manifest.json";
  const std::uint64_t seed = study.scenarios.empty() ? 0 : study.scenarios.front().seed;
  write_file(manifest_path,
             manifest("simulate", json::parse(sim::to_json(study)), seed, {a.out, manifest_path}, seconds_since(t0))
                     .dump(2) +
                 "\n");
  std::cout << "wrote " << a.out << " (" << results.size() << " scenarios)\n";
  return 0;
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string data;
  std::string models;
  double alpha = 0.05;
  std::string df_mode = "normal";
  std::string alternative;
  std::string out = "analysis";
  std::string svg;
  std::string subgroups;
  std::string reference;
  std::string layout = "composite";
};

casestudy::EventLayout parse_layout(const std::string& s) {
  if (s == "composite") return casestudy::EventLayout::Composite;
  if (s == "stacked") return casestudy::EventLayout::Stacked;
  if (s == "aligned") return casestudy::EventLayout::Aligned;
  throw Error(ErrorCode::InvalidArgument, "unknown layout '" + s + "'");
}

std::vector<InferenceReport> analyze_counts(const AnalyzeArgs& a) {
  const casestudy::CountTable table = casestudy::read_count_table(fs::path(a.data));
  const casestudy::Analysis r =
      casestudy::analyze(table, a.alpha, casestudy::case_study_quadrature(), parse_layout(a.layout));
  return r.all();
}

std::vector<InferenceReport> analyze_subjects(const AnalyzeArgs& a) {
  if (a.models.empty()) throw Error(ErrorCode::InvalidArgument, "subject-level data needs --models");
  std::vector<ModelSpec> specs = parse_model_specs(read_file(a.models));
  DatasetCsvOptions opts;
  opts.subgroup_columns = split_list(a.subgroups);
  if (opts.subgroup_columns.empty()) {
    // Default: every subgroup column the models refer to.
    for (const auto& s : specs) {
      if (s.subset == "all") continue;
      const std::string flag = s.subset[0] == '!' ? s.subset.substr(1) : s.subset;
      if (std::find(opts.subgroup_columns.begin(), opts.subgroup_columns.end(), flag) == opts.subgroup_columns.end())
        opts.subgroup_columns.push_back(flag);
    }
  }
  if (!a.reference.empty()) opts.reference = a.reference;
  const Dataset data = read_dataset_csv(fs::path(a.data), opts);
  check_model_specs(data, specs);

  Alternative alt = specs.front().direction;
  if (!a.alternative.empty()) {
    alt = parse_alternative(a.alternative);
    for (auto& s : specs) s.direction = alt;
  }
  for (const auto& s : specs)
    if (s.direction != alt)
      throw Error(ErrorCode::InvalidArgument, "all models must share one alternative for the joint adjustment");

  std::vector<MarginalModel> models;
  bool all_logit = true;
  for (const auto& s : specs) {
    models.push_back(fit(data, s));
    all_logit = all_logit && s.family == Family::BinomialLogit;
  }
  const MmmFit joint = stack(models, parse_df_mode(a.df_mode));
  return {noadjust_report(models, a.alpha, alt, all_logit), bonferroni_report(models, a.alpha, alt, all_logit),
          mmm_report(joint, a.alpha, alt, {}, all_logit)};
}

bool is_count_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, "cannot read '" + path + "'");
  std::string line;
  std::getline(in, line);
  return casestudy::looks_like_count_table(csv::split_line(line));
}

int cmd_analyze(const AnalyzeArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "--alpha must lie in (0, 1)");
  const bool counts = is_count_table(a.data);
  const std::vector<InferenceReport> reports = counts ? analyze_counts(a) : analyze_subjects(a);

  const std::string table = format_table(reports);
  std::vector<std::string> outputs = {a.out + ".json", a.out + ".txt"};
  write_file(outputs[0], to_json(reports) + "\n");
  write_file(outputs[1], table);
  if (!a.svg.empty()) {
    write_file(a.svg, forest_plot_svg(reports.back(), "Simultaneous confidence intervals"));
    outputs.push_back(a.svg);
  }
  outputs.push_back(a.out + ".manifest.json");
  json config = {{"data", a.data},        {"models", a.models},         {"alpha", a.alpha},
                 {"df_mode", a.df_mode},  {"alternative", a.alternative}, {"subgroups", a.subgroups},
                 {"reference", a.reference}, {"layout", a.layout},      {"input", counts ? "counts" : "subjects"}};
  write_file(outputs.back(), manifest("analyze", config, reports.back().seed, outputs, seconds_since(t0)).dump(2) + "\n");
  std::cout << table;
  return 0;
}

// ---- tables ----------------------------------------------------------------

struct TablesArgs {
  std::string which;
  int reps = 10000;
  std::optional<std::uint64_t> seed;
  std::string n;
  std::string prop;
  unsigned threads = 0;
};

bool selected(const std::string& filter, double v) {
  if (filter.empty()) return true;
  for (const auto& s : split_list(filter))
    if (std::abs(std::stod(s) - v) < 1e-9) return true;
  return false;
}

void print_cell(const std::string& table, int n, double prop, const char* method, double published, double simulated,
                double tol, int& fails) {
  const double diff = simulated - published;
  const bool ok = std::abs(diff) <= tol;
  if (!ok) ++fails;
  std::printf("%-7s %4d %5.2f %-10s %9.4f %9.4f %+8.4f  %s\n", table.c_str(), n, prop, method, published, simulated,
              diff, ok ? "pass" : "FAIL");
}

int tables_fwer(const TablesArgs& a) {
  const std::vector<sim::PublishedTable> tables = sim::published_tables(a.which);
  const double base = a.which == "a5" || a.which == "a6" ? 0.015 : 0.012;
  const double tol = sim::comparison_tolerance(base, a.reps);
  sim::RunOptions options;
  options.threads = a.threads;
  std::printf("%-7s %4s %5s %-10s %9s %9s %8s\n", "table", "N", "prop", "method", "published", "simulated", "diff");
  int fails = 0, cells = 0;
  // Tables that share a design (both families of a5) are simulated on the same datasets.
  const sim::PublishedTable& lead = tables.front();
  for (const auto& row : lead.rows) {
    if (!selected(a.n, row.total_n) || !selected(a.prop, row.prop_target)) continue;
    sim::Scenario s = lead.design;
    s.total_n = row.total_n;
    s.prop_target = row.prop_target;
    s.replications = a.reps;
    if (a.seed) s.seed = *a.seed;
    std::vector<sim::HypothesisFamily> families;
    for (const auto& t : tables) families.push_back(t.design.family);
    std::vector<sim::Method> methods;
    for (sim::Method m : lead.methods)
      if (sim::supports(m, s)) methods.push_back(m);
    const std::vector<sim::SimResult> results = sim::run_families(s, families, methods, options);
    for (std::size_t k = 0; k < tables.size(); ++k)
      for (sim::Method m : tables[k].methods) {
        const auto pub = tables[k].value(row.total_n, row.prop_target, m);
        if (!pub || !results[k].find(m)) continue;
        print_cell(tables[k].name, row.total_n, row.prop_target, sim::to_string(m), *pub, results[k].rate(m), tol,
                   fails);
        ++cells;
      }
    std::fflush(stdout);
  }
  std::printf("%d of %d cells within +/-%.4f at %d replications%s\n", cells - fails, cells, tol, a.reps,
              a.reps < 10000 ? " (low precision)" : "");
  return 0;
}

int tables_power(const TablesArgs& a) {
  sim::RunOptions options;
  options.threads = a.threads;
  const double widen = sim::comparison_tolerance(1.0, a.reps);
  std::printf("%-38s %9s %9s %8s  %s\n", "peak power gain (pp)", "published", "simulated", "diff", "where");
  for (sim::PowerClaim c : sim::power_claims(a.reps)) {
    if (a.seed) c.base.seed = *a.seed;
    const sim::PowerGain g = sim::peak_power_gain(c.base, c.better, c.reference, sim::power_deltas(),
                                                  sim::power_proportions(), options);
    const double pp = 100.0 * g.peak;
    const bool ok = std::abs(pp - c.published_pp) <= c.tolerance_pp * widen;
    std::printf("%-38s %9.2f %9.2f %+8.2f  delta=%g prop=%.1f %s  %s\n", c.description.c_str(), c.published_pp, pp,
                pp - c.published_pp, g.at.delta, g.at.prop_target, sim::to_string(g.family), ok ? "pass" : "FAIL");
    std::fflush(stdout);
  }
  if (a.reps < 10000) std::printf("(low precision: %d replications)\n", a.reps);
  return 0;
}

int cmd_tables(const TablesArgs& a) {
  if (a.reps < 1) throw Error(ErrorCode::InvalidArgument, "--reps must be positive");
  if (a.which == "power") return tables_power(a);
  return tables_fwer(a);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple marginal models for subgroup analyses: simulation, analysis and table reproduction"};
  app.set_version_flag("--version", std::string(MMSI_VERSION));
  app.require_subcommand(1);

  SimulateArgs sa;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a simulation study and write a CSV plus manifest");
  simulate->add_option("config", sa.config, "Study JSON, or the manifest of an earlier run")->required();
  simulate->add_option("--reps", sa.reps, "Replications per scenario (overrides the config)");
  simulate->add_option("--seed", sa.seed, "Base seed (overrides the config)");
  simulate->add_option("--methods", sa.methods, "Comma-separated methods (default: all that apply)");
  simulate->add_option("--threads", sa.threads, "Worker threads (default: MMSI_THREADS or all cores)");
  simulate->add_option("--out", sa.out, "Output CSV path")->capture_default_str();

  AnalyzeArgs aa;
  CLI::App* analyze = app.add_subcommand("analyze", "Analyze a count table or a subject-level dataset");
  analyze->add_option("data", aa.data, "Count table or subject CSV")->required();
  analyze->add_option("--models", aa.models, "Model list JSON (subject-level data)");
  analyze->add_option("--alpha", aa.alpha, "Familywise level")->capture_default_str();
  analyze->add_option("--df-mode", aa.df_mode, "normal, dfmin, dfmax or dfind")->capture_default_str();
  analyze->add_option("--alternative", aa.alternative, "two-sided, greater or less (overrides the models)");
  analyze->add_option("--out", aa.out, "Output prefix for .json, .txt and .manifest.json")->capture_default_str();
  analyze->add_option("--svg", aa.svg, "Forest plot of the simultaneous intervals");
  analyze->add_option("--subgroups", aa.subgroups, "Comma-separated subgroup flag columns");
  analyze->add_option("--reference", aa.reference, "Reference treatment level");
  analyze->add_option("--layout", aa.layout, "Event layout for count tables: composite, stacked or aligned")
      ->capture_default_str();

  TablesArgs ta;
  CLI::App* tables = app.add_subcommand("tables", "Compare simulated error rates and power gains with published values");
  tables->add_option("--which", ta.which, "a3, a4, a5, a6 or power")
      ->required()
      ->check(CLI::IsMember({"a3", "a4", "a5", "a6", "power"}));
  tables->add_option("--reps", ta.reps, "Replications per scenario")->capture_default_str();
  tables->add_option("--seed", ta.seed, "Base seed");
  tables->add_option("--n", ta.n, "Comma-separated N values to keep");
  tables->add_option("--prop", ta.prop, "Comma-separated subgroup proportions to keep");
  tables->add_option("--threads", ta.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sa);
    if (analyze->parsed()) return cmd_analyze(aa);
    return cmd_tables(ta);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kExitNumerical : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
