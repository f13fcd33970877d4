#include "mmsi/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "mmsi/contrasts.hpp"
#include "mmsi/csv.hpp"
#include "mmsi/error.hpp"
#include "mmsi/lattice.hpp"
#include "mmsi/linmodels.hpp"
#include "mmsi/mmm.hpp"

namespace mmsi::sim {

namespace {

constexpr double kAlpha = 0.05;

struct MethodName {
  Method method;
  const char* name;
};

constexpr MethodName kMethodNames[] = {
    {Method::NoAdjust, "noadjust"}, {Method::Bonferroni, "ttest"},     {Method::CellMeans, "cellmeans"},
    {Method::Mmm, "mmm"},           {Method::MmmDfMax, "mmm.dfmax"}, {Method::MmmDfMin, "mmm.dfmin"},
    {Method::MmmDfInd, "mmm.dfind"},
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

const char* to_string(HypothesisFamily f) noexcept {
  return f == HypothesisFamily::Any ? "any" : "targeted_or_total";
}

HypothesisFamily parse_family(const std::string& s) {
  const std::string t = lower(s);
  if (t == "any") return HypothesisFamily::Any;
  if (t == "targeted_or_total" || t == "targeted-or-total" || t == "targeted or total" || t == "tt")
    return HypothesisFamily::TargetedOrTotal;
  throw Error(ErrorCode::InvalidArgument, "unknown hypothesis family '" + s + "'");
}

const char* to_string(Method m) noexcept {
  for (const auto& e : kMethodNames)
    if (e.method == m) return e.name;
  return "?";
}

Method parse_method(const std::string& s) {
  const std::string t = lower(s);
  if (t == "bonferroni") return Method::Bonferroni;
  if (t == "mmm.normal") return Method::Mmm;
  for (const auto& e : kMethodNames)
    if (t == e.name) return e.method;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + s + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> all = {Method::NoAdjust, Method::Bonferroni, Method::CellMeans, Method::Mmm,
                                          Method::MmmDfMax, Method::MmmDfMin,   Method::MmmDfInd};
  return all;
}

// ---- scenario ------------------------------------------------------------

void Scenario::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (total_n < 8 || total_n % 2 != 0) bad("N must be an even number of at least 8");
  if (!(sd > 0.0) || !std::isfinite(sd)) bad("sd must be positive");
  if (!(prop_target > 0.0 && prop_target < 1.0)) bad("prop_targ must lie strictly between 0 and 1");
  if (!std::isfinite(delta)) bad("delta must be finite");
  if (endpoints != 1 && endpoints != 2) bad("endpoints must be 1 or 2");
  if (endpoints == 2 && !(rho > -1.0 && rho < 1.0)) bad("rho must lie strictly between -1 and 1");
  if (replications < 1) bad("replications must be positive");
  const int k = targeted_per_arm();
  if (k < 2 || total_n / 2 - k < 2) bad("every subgroup needs at least 2 subjects per arm");
}

int Scenario::targeted_per_arm() const {
  return static_cast<int>(std::lround(prop_target * (total_n / 2)));
}

Dataset generate(const Scenario& s, std::uint64_t replicate) {
  const int m = s.total_n / 2;
  const int k = s.targeted_per_arm();
  std::mt19937_64 rng(lattice::splitmix64(s.seed ^ lattice::splitmix64(replicate + 0x5bd1e995ULL)));
  std::normal_distribution<double> z;

  Eigen::VectorXi trt(s.total_n);
  Eigen::VectorXd target(s.total_n);
  for (int i = 0; i < s.total_n; ++i) {
    trt(i) = i < m ? 0 : 1;
    target(i) = (i % m) < k ? 1.0 : 0.0;
  }
  Dataset d({"control", "treatment"}, trt);
  d.add_subgroup("target", target);
  if (s.overlap) {
    Eigen::VectorXd target2 = Eigen::VectorXd::Zero(s.total_n);
    std::vector<int> order(m);
    for (int arm = 0; arm < 2; ++arm) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int j = 0; j < k; ++j) target2(arm * m + order[j]) = 1.0;
    }
    d.add_subgroup("target2", target2);
  }
  Eigen::VectorXd y1(s.total_n), y2(s.total_n);
  const double w = std::sqrt(1.0 - s.rho * s.rho);
  for (int i = 0; i < s.total_n; ++i) {
    const double shift = trt(i) == 1 && target(i) == 1.0 ? s.delta : 0.0;
    const double e1 = z(rng);
    y1(i) = shift + s.sd * e1;
    if (s.endpoints == 2) y2(i) = shift + s.sd * (s.rho * e1 + w * z(rng));
  }
  d.add_endpoint("y1", y1);
  if (s.endpoints == 2) d.add_endpoint("y2", y2);
  return d;
}

std::vector<Hypothesis> hypotheses(const Scenario& s, HypothesisFamily family) {
  const bool effect = s.delta != 0.0;
  std::vector<Hypothesis> out;
  for (int e = 1; e <= s.endpoints; ++e) {
    const std::string y = "y" + std::to_string(e);
    out.push_back({y, "all", effect});
    out.push_back({y, "target", effect});
    if (s.overlap) out.push_back({y, "target2", effect});
    if (family == HypothesisFamily::Any) {
      out.push_back({y, "!target", false});
      // The complement of the second definition still holds targeted subjects.
      if (s.overlap) out.push_back({y, "!target2", effect});
    }
  }
  return out;
}

bool supports(Method m, const Scenario& s) {
  return m != Method::CellMeans || (!s.overlap && s.endpoints == 1);
}

// ---- results -------------------------------------------------------------

const MethodCounts* SimResult::find(Method m) const {
  for (const auto& c : counts)
    if (c.method == m) return &c;
  return nullptr;
}

double SimResult::rate(Method m) const {
  const MethodCounts* c = find(m);
  if (!c) throw Error(ErrorCode::InvalidArgument, std::string("method ") + to_string(m) + " was not run");
  const long hits = scenario.delta == 0.0 ? c->true_null_rejection : c->false_null_rejection;
  return static_cast<double>(hits) / scenario.replications;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MMSI_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct Decision {
  bool true_null = false;
  bool false_null = false;
};

// Single-step max-type decision restricted to one side of the truth: the
// family rejects some hypothesis in `members` iff the largest statistic among
// them is beyond the common critical value.
Decision max_type_decision(const CorrelationMatrix& corr, const Eigen::VectorXd& stats, std::optional<int> df,
                           const std::vector<Hypothesis>& hyps, const QuadratureSettings& q) {
  Decision d;
  for (int side = 0; side < 2; ++side) {
    const bool want_false = side == 1;
    Eigen::VectorXd masked = stats;
    bool any = false;
    for (std::size_t r = 0; r < hyps.size(); ++r) {
      if (hyps[r].false_null == want_false)
        any = true;
      else
        masked(static_cast<Index>(r)) = 0.0;
    }
    if (!any) continue;
    const bool rej = max_type_any_rejected(corr, masked, df, kAlpha, Alternative::TwoSided, q);
    (want_false ? d.false_null : d.true_null) = rej;
  }
  return d;
}

Decision marginal_decision(const std::vector<double>& p, double level, const std::vector<Hypothesis>& hyps) {
  Decision d;
  for (std::size_t r = 0; r < hyps.size(); ++r)
    if (p[r] < level) (hyps[r].false_null ? d.false_null : d.true_null) = true;
  return d;
}

DfMode df_mode_of(Method m) {
  switch (m) {
    case Method::MmmDfMax: return DfMode::DfMax;
    case Method::MmmDfMin: return DfMode::DfMin;
    case Method::MmmDfInd: return DfMode::DfInd;
    default: return DfMode::Normal;
  }
}

Index contrast_row(const std::string& subset) {
  if (subset == "target") return 0;
  if (subset == "!target") return 1;
  return 2;
}

Decision evaluate(Method method, const Dataset& data, const std::vector<MarginalModel>& models,
                  const std::vector<double>& p, const std::vector<Hypothesis>& hyps, const QuadratureSettings& q) {
  switch (method) {
    case Method::NoAdjust: return marginal_decision(p, kAlpha, hyps);
    case Method::Bonferroni: return marginal_decision(p, kAlpha / static_cast<double>(hyps.size()), hyps);
    case Method::CellMeans: {
      const CellMeansModel cm = fit_cell_means(data, "y1", "target");
      const ContrastMatrix all = subgroup_contrasts(cm.cell_counts);
      std::vector<Index> rows;
      for (const auto& h : hyps) rows.push_back(contrast_row(h.subset));
      const ContrastStatistics st = contrast_statistics(cm, all, rows);
      const CorrelationMatrix corr = contrast_correlation(select_rows(all, rows), cm.cell_counts);
      return max_type_decision(corr, st.statistics, cm.residual_df, hyps, q);
    }
    default: {
      const MmmFit fit = stack(models, df_mode_of(method));
      return max_type_decision(fit.c_hat, reference_statistics(fit, Alternative::TwoSided), fit.common_df(), hyps,
                               q);
    }
  }
}

struct FamilyPlan {
  HypothesisFamily family;
  std::vector<Hypothesis> hyps;
};

}  // namespace

std::vector<SimResult> run_families(const Scenario& s, const std::vector<HypothesisFamily>& families,
                                    const std::vector<Method>& methods, const RunOptions& options) {
  s.validate();
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "no methods selected");
  for (Method m : methods)
    if (!supports(m, s))
      throw Error(ErrorCode::IncompatibleMethod,
                  "cellmeans needs a single endpoint and one subgroup definition");
  const auto start = std::chrono::steady_clock::now();

  std::vector<FamilyPlan> plans;
  for (HypothesisFamily f : families) plans.push_back({f, hypotheses(s, f)});
  const std::size_t nf = plans.size(), nm = methods.size();

  const unsigned threads = std::min<unsigned>(resolve_threads(options.threads), s.replications);
  std::vector<std::vector<MethodCounts>> partial(threads, std::vector<MethodCounts>(nf * nm));
  std::vector<std::exception_ptr> failures(threads);

  auto worker = [&](unsigned t) {
    try {
      auto& acc = partial[t];
      for (int rep = static_cast<int>(t); rep < s.replications; rep += static_cast<int>(threads)) {
        const Dataset data = generate(s, static_cast<std::uint64_t>(rep));
        for (std::size_t f = 0; f < nf; ++f) {
          const auto& hyps = plans[f].hyps;
          std::vector<MarginalModel> models;
          std::vector<double> p;
          for (const auto& h : hyps) {
            models.push_back(fit_ols(data, ModelSpec{h.endpoint, h.subset, Family::Gaussian,
                                                     Alternative::TwoSided, {}, {}}));
            p.push_back(marginal_p(models.back(), Alternative::TwoSided));
          }
          for (std::size_t k = 0; k < nm; ++k) {
            const Decision d = evaluate(methods[k], data, models, p, hyps, options.quadrature);
            MethodCounts& c = acc[f * nm + k];
            c.true_null_rejection += d.true_null;
            c.false_null_rejection += d.false_null;
            c.any_rejection += d.true_null || d.false_null;
          }
        }
      }
    } catch (...) {
      failures[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : failures)
    if (e) std::rethrow_exception(e);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::vector<SimResult> out;
  for (std::size_t f = 0; f < nf; ++f) {
    SimResult r;
    r.scenario = s;
    r.scenario.family = plans[f].family;
    r.family = plans[f].family;
    r.wall_seconds = wall;
    for (std::size_t k = 0; k < nm; ++k) {
      MethodCounts c;
      c.method = methods[k];
      for (const auto& acc : partial) {
        c.any_rejection += acc[f * nm + k].any_rejection;
        c.true_null_rejection += acc[f * nm + k].true_null_rejection;
        c.false_null_rejection += acc[f * nm + k].false_null_rejection;
      }
      r.counts.push_back(c);
    }
    out.push_back(std::move(r));
  }
  return out;
}

SimResult run(const Scenario& s, const std::vector<Method>& methods, const RunOptions& options) {
  return run_families(s, {s.family}, methods, options).front();
}

// ---- configuration -------------------------------------------------------

namespace {

using nlohmann::json;

std::vector<json> values_of(const json& cfg, std::initializer_list<const char*> keys, const json& fallback) {
  for (const char* k : keys) {
    if (!cfg.contains(k)) continue;
    const json& v = cfg.at(k);
    if (v.is_array()) {
      if (v.empty()) throw Error(ErrorCode::Schema, std::string("config key '") + k + "' is an empty list");
      return std::vector<json>(v.begin(), v.end());
    }
    return {v};
  }
  return {fallback};
}

template <class T>
T as(const json& v, const char* key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Schema, std::string("config key '") + key + "' has the wrong type");
  }
}

HypothesisFamily family_of(const json& v) {
  return parse_family(as<std::string>(v, "family"));
}

std::vector<Scenario> expand_grid(const json& cfg, const Scenario& base) {
  const Scenario d = base;
  std::vector<Scenario> out;
  for (const json& n : values_of(cfg, {"N", "total_n"}, d.total_n))
    for (const json& prop : values_of(cfg, {"prop_targ", "prop_target"}, d.prop_target))
      for (const json& sd : values_of(cfg, {"sd"}, d.sd))
        for (const json& delta : values_of(cfg, {"delta"}, d.delta))
          for (const json& ep : values_of(cfg, {"endpoints"}, d.endpoints))
            for (const json& rho : values_of(cfg, {"rho"}, d.rho))
              for (const json& ov : values_of(cfg, {"overlap"}, d.overlap))
                for (const json& fam : values_of(cfg, {"family"}, to_string(d.family))) {
                  Scenario s = base;
                  if (cfg.contains("replications")) s.replications = as<int>(cfg.at("replications"), "replications");
                  if (cfg.contains("seed")) s.seed = as<std::uint64_t>(cfg.at("seed"), "seed");
                  s.total_n = as<int>(n, "N");
                  s.prop_target = as<double>(prop, "prop_targ");
                  s.sd = as<double>(sd, "sd");
                  s.delta = as<double>(delta, "delta");
                  s.endpoints = as<int>(ep, "endpoints");
                  s.rho = as<double>(rho, "rho");
                  s.overlap = as<bool>(ov, "overlap");
                  s.family = family_of(fam);
                  s.validate();
                  out.push_back(s);
                }
  return out;
}

}  // namespace

Study parse_study(const std::string& json_text) {
  json cfg;
  try {
    cfg = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("config is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw Error(ErrorCode::Schema, "config must be a JSON object");
  Scenario base;
  if (cfg.contains("replications")) base.replications = as<int>(cfg["replications"], "replications");
  if (cfg.contains("seed")) base.seed = as<std::uint64_t>(cfg["seed"], "seed");
  Study study;
  if (cfg.contains("methods")) {
    study.methods_given = true;
    for (const auto& m : values_of(cfg, {"methods"}, json()))
      study.methods.push_back(parse_method(as<std::string>(m, "methods")));
  } else {
    study.methods = all_methods();
  }
  if (cfg.contains("scenarios")) {
    if (!cfg["scenarios"].is_array()) throw Error(ErrorCode::Schema, "'scenarios' must be a list");
    for (const auto& item : cfg["scenarios"]) {
      if (!item.is_object()) throw Error(ErrorCode::Schema, "every scenario must be an object");
      for (const auto& s : expand_grid(item, base)) study.scenarios.push_back(s);
    }
  } else {
    study.scenarios = expand_grid(cfg, base);
  }
  if (study.scenarios.empty()) throw Error(ErrorCode::Schema, "config defines no scenarios");
  return study;
}

Study load_study(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_study(ss.str());
}

std::string to_json(const Study& study, int indent) {
  json j;
  if (study.methods_given) {
    j["methods"] = json::array();
    for (Method m : study.methods) j["methods"].push_back(to_string(m));
  }
  j["scenarios"] = json::array();
  for (const Scenario& s : study.scenarios) {
    j["scenarios"].push_back({{"N", s.total_n},
                              {"prop_targ", s.prop_target},
                              {"sd", s.sd},
                              {"delta", s.delta},
                              {"endpoints", s.endpoints},
                              {"rho", s.rho},
                              {"overlap", s.overlap},
                              {"family", to_string(s.family)},
                              {"replications", s.replications},
                              {"seed", s.seed}});
  }
  return j.dump(indent);
}

// ---- CSV -----------------------------------------------------------------

namespace {
constexpr const char* kScenarioColumns[] = {"N",       "prop_targ", "sd",   "delta", "endpoints",
                                            "rho",     "overlap",   "family", "reps", "seed"};
}

void write_csv(std::ostream& out, const std::vector<SimResult>& results, const std::vector<Method>& methods) {
  using csv::format_double;
  bool first = true;
  for (const char* c : kScenarioColumns) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  for (Method m : methods) out << ',' << to_string(m);
  out << '\n';
  for (const auto& r : results) {
    const Scenario& s = r.scenario;
    out << s.total_n << ',' << format_double(s.prop_target) << ',' << format_double(s.sd) << ','
        << format_double(s.delta) << ',' << s.endpoints << ',' << format_double(s.rho) << ','
        << (s.overlap ? "true" : "false") << ',' << to_string(r.family) << ',' << s.replications << ',' << s.seed;
    for (Method m : methods) {
      out << ',';
      if (r.find(m))
        out << format_double(r.rate(m));
      else
        out << "NA";
    }
    out << '\n';
  }
}

std::vector<CsvRow> read_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  std::vector<int> idx;
  for (const char* c : kScenarioColumns) {
    const int i = t.column(c);
    if (i < 0) throw Error(ErrorCode::Schema, std::string("simulation CSV lacks column '") + c + "'");
    idx.push_back(i);
  }
  std::vector<std::pair<int, Method>> method_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (std::find(idx.begin(), idx.end(), static_cast<int>(c)) != idx.end()) continue;
    method_cols.emplace_back(static_cast<int>(c), parse_method(t.header[c]));
  }
  std::vector<CsvRow> out;
  std::size_t line = 1;
  for (const auto& row : t.rows) {
    ++line;
    auto field = [&](int k) -> const std::string& { return row[idx[k]]; };
    try {
      CsvRow r;
      r.scenario.total_n = std::stoi(field(0));
      r.scenario.prop_target = std::stod(field(1));
      r.scenario.sd = std::stod(field(2));
      r.scenario.delta = std::stod(field(3));
      r.scenario.endpoints = std::stoi(field(4));
      r.scenario.rho = std::stod(field(5));
      r.scenario.overlap = field(6) == "true" || field(6) == "1" || field(6) == "TRUE";
      r.scenario.family = parse_family(field(7));
      r.scenario.replications = std::stoi(field(8));
      r.scenario.seed = std::stoull(field(9));
      for (const auto& [c, m] : method_cols) {
        const std::string& v = row[c];
        r.rates.emplace_back(m, v == "NA" || v.empty() ? std::nullopt : std::optional<double>(std::stod(v)));
      }
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Schema, "simulation CSV line " + std::to_string(line) + " has a malformed number");
    }
  }
  return out;
}

}  // namespace mmsi::sim
