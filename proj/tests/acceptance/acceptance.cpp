// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance [--only C1,C3] [--reps N]
//
// Criteria 2 to 5 simulate 10,000 replications per cell by default and take
// about half an hour on one core; MMSI_THREADS sets the worker count.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmsi/casestudy.hpp"
#include "mmsi/csv.hpp"
#include "mmsi/distributions.hpp"
#include "mmsi/linmodels.hpp"
#include "mmsi/mmm.hpp"
#include "mmsi/mvdist.hpp"
#include "mmsi/reproduce.hpp"
#include "mmsi/simulator.hpp"

using namespace mmsi;
using namespace mmsi::sim;

namespace {

int g_reps = 10000;

struct Verdict {
  bool pass = true;
  std::string summary;
};

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: case study ---------------------------------------------------------

Verdict case_study() {
  std::ifstream in(std::string(MMSI_DATA_DIR) + "/published/case_study.csv");
  const csv::Table pub = csv::read(in);
  const int c_or = pub.column("or"), c_low = pub.column("mmm_lower"), c_p = pub.column("mmm_p");

  const auto t0 = std::chrono::steady_clock::now();
  const casestudy::Analysis a = casestudy::analyze(casestudy::read_count_table(casestudy::bundled_table_path()));
  const double elapsed = seconds_since(t0);

  int or_exact = 0, low_ok = 0, p_ok = 0;
  double worst_low = 0.0, worst_p = 0.0;
  for (std::size_t k = 0; k < pub.rows.size(); ++k) {
    const auto& h = a.mmm.hypotheses.at(k);
    const double odds = std::round(100.0 * std::exp(h.estimate)) / 100.0;
    const double low = std::exp(h.lower);
    const double d_low = std::abs(low - std::stod(pub.rows[k][c_low]));
    const double d_p = std::abs(h.p_adjusted - std::stod(pub.rows[k][c_p]));
    or_exact += std::abs(odds - std::stod(pub.rows[k][c_or])) < 1e-9;
    low_ok += d_low <= 0.02;
    p_ok += d_p <= 0.005;
    worst_low = std::max(worst_low, d_low);
    worst_p = std::max(worst_p, d_p);
    detail("%-18s OR %.2f (%s)  lower %.3f (%s)  p %.4f (%s)", h.label.c_str(), odds, pub.rows[k][c_or].c_str(), low,
           pub.rows[k][c_low].c_str(), h.p_adjusted, pub.rows[k][c_p].c_str());
  }
  Verdict v;
  v.pass = or_exact == 9 && low_ok == 9 && p_ok == 9 && elapsed < 10.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "ORs exact %d/9, lower bounds %d/9 (max diff %.4f), p %d/9 (max diff %.4f), %.2f s",
                or_exact, low_ok, worst_low, p_ok, worst_p, elapsed);
  v.summary = buf;
  return v;
}

// ---- 2 to 4: published error rates -----------------------------------------

struct Cell {
  const PublishedTable* table;
  int n;
  double prop;
  std::vector<Method> methods;  // empty: every method of the table
};

Verdict fwer_cells(const std::vector<Cell>& cells, double base_tol) {
  const double tol = comparison_tolerance(base_tol, g_reps);
  int checked = 0, within = 0;
  double worst = 0.0;
  for (const Cell& c : cells) {
    Scenario s = c.table->design;
    s.total_n = c.n;
    s.prop_target = c.prop;
    s.replications = g_reps;
    const std::vector<Method> methods = c.methods.empty() ? c.table->methods : c.methods;
    const auto t0 = std::chrono::steady_clock::now();
    const SimResult r = run(s, methods);
    for (Method m : methods) {
      const double pub = *c.table->value(c.n, c.prop, m);
      const double diff = r.rate(m) - pub;
      const bool ok = std::abs(diff) <= tol;
      ++checked;
      within += ok;
      worst = std::max(worst, std::abs(diff));
      detail("%-7s N=%-3d prop=%.1f %-10s published %.4f simulated %.4f diff %+.4f %s", c.table->name.c_str(), c.n,
             c.prop, to_string(m), pub, r.rate(m), diff, ok ? "" : "<-- outside");
    }
    detail("(%.0f s)", seconds_since(t0));
  }
  Verdict v;
  v.pass = within == checked;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d/%d cells within +/-%.3f at %d replications (max diff %.4f)", within, checked, tol,
                g_reps, worst);
  v.summary = buf;
  return v;
}

Verdict targeted_or_total() {
  static const auto tables = published_tables("a3");
  std::vector<Cell> cells;
  for (int n : {20, 100, 500})
    for (double p : {0.5, 0.8}) cells.push_back({&tables[0], n, p, {}});
  return fwer_cells(cells, 0.012);
}

Verdict any_family() {
  static const auto tables = published_tables("a4");
  return fwer_cells({{&tables[0], 20, 0.5, {Method::Mmm, Method::MmmDfMin}}, {&tables[0], 500, 0.5, {Method::Mmm}}},
                    0.012);
}

Verdict other_designs() {
  static const auto overlap = published_tables("a5");
  static const auto two = published_tables("a6");
  return fwer_cells({{&overlap[0], 50, 0.5, {Method::MmmDfInd}}, {&two[0], 100, 0.5, {Method::MmmDfInd}}}, 0.015);
}

// ---- 5: power gains --------------------------------------------------------

Verdict power() {
  const double widen = comparison_tolerance(1.0, g_reps);
  int ok = 0, total = 0;
  std::string parts;
  for (const PowerClaim& c : power_claims(g_reps)) {
    const auto t0 = std::chrono::steady_clock::now();
    const PowerGain g = peak_power_gain(c.base, c.better, c.reference, power_deltas(), power_proportions());
    const double pp = 100.0 * g.peak;
    const bool pass = std::abs(pp - c.published_pp) <= c.tolerance_pp * widen;
    ++total;
    ok += pass;
    detail("%-38s published %5.2f simulated %5.2f diff %+5.2f (delta=%g prop=%.1f %s, %.0f s)%s",
           c.description.c_str(), c.published_pp, pp, pp - c.published_pp, g.at.delta, g.at.prop_target,
           to_string(g.family), seconds_since(t0), pass ? "" : " <-- outside");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%s%.2f", parts.empty() ? "" : "/", pp);
    parts += buf;
  }
  Verdict v;
  v.pass = ok == total;
  v.summary = std::to_string(ok) + "/" + std::to_string(total) + " peak gains within band (pp: " + parts + ")";
  return v;
}

// ---- 6: properties ---------------------------------------------------------

Eigen::MatrixXd random_correlation(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(dim, dim + 2);
  for (Index i = 0; i < a.size(); ++i) a(i) = z(rng);
  const Eigen::MatrixXd cov = a * a.transpose();
  const Eigen::VectorXd s = cov.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd c = s.asDiagonal() * cov * s.asDiagonal();
  c.diagonal().setOnes();
  return c;
}

bool property_mc_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::normal_distribution<double> z;
  int outside = 0;
  for (int problem = 0; problem < 50; ++problem) {
    const int dim = 2 + problem % 3;
    const Eigen::MatrixXd c = random_correlation(dim, rng);
    Eigen::VectorXd lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
      const double x = u(rng), y = u(rng);
      lo(i) = std::min(x, y) - 0.3;
      hi(i) = problem % 4 == 0 ? INFINITY : std::max(x, y) + 0.3;
    }
    const Probability p = mv_rect_prob(CorrelationMatrix(c), lo, hi);
    const Eigen::MatrixXd l = c.llt().matrixL();
    const int draws = 200000;
    long hits = 0;
    Eigen::VectorXd e(dim);
    for (int k = 0; k < draws; ++k) {
      for (int i = 0; i < dim; ++i) e(i) = z(rng);
      const Eigen::VectorXd x = l * e;
      hits += ((x.array() >= lo.array()) && (x.array() <= hi.array())).all();
    }
    const double mc = static_cast<double>(hits) / draws;
    const double se = std::sqrt(std::max(mc * (1 - mc), 1.0 / draws) / draws);
    if (std::abs(p.value - mc) > 3.0 * se) ++outside;
  }
  detail("(a) %d of 50 problems outside 3 oracle SE", outside);
  return outside <= 1;  // about 0.3% of honest comparisons exceed 3 SE
}

bool property_sidak() {
  double worst = 0.0;
  for (int dim : {2, 3, 4, 6, 10})
    for (double alpha : {0.1, 0.05, 0.01}) {
      const CorrelationMatrix id = CorrelationMatrix::identity(dim);
      const double two = dist::norm_quantile(1 - (1 - std::pow(1 - alpha, 1.0 / dim)) / 2);
      const double one = dist::norm_quantile(std::pow(1 - alpha, 1.0 / dim));
      worst = std::max(worst, std::abs(equicoordinate_quantile(id, alpha, Tail::TwoSided).value - two));
      worst = std::max(worst, std::abs(equicoordinate_quantile(id, alpha, Tail::OneSided).value - one));
    }
  detail("(b) largest deviation from the Sidak quantile %.2e", worst);
  return worst < 2e-3;
}

Dataset fuzz_trial(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXi trt(n);
  Eigen::VectorXd g(n), h(n), y1(n), y2(n), b(n);
  for (int i = 0; i < n; ++i) {
    trt(i) = i < n / 2 ? 0 : 1;
    g(i) = (i % (n / 2)) < n / 5 ? 1.0 : 0.0;
    h(i) = coin(rng) ? 1.0 : 0.0;
    const double e = z(rng);
    y1(i) = 0.4 * trt(i) * g(i) + e;
    y2(i) = 0.6 * e + 0.8 * z(rng);
    b(i) = z(rng) + 0.3 * trt(i) > 0.2 ? 1.0 : 0.0;
  }
  Dataset d({"ref", "test"}, trt);
  d.add_subgroup("g", g);
  d.add_subgroup("h", h);
  d.add_endpoint("y1", y1);
  d.add_endpoint("y2", y2);
  d.add_endpoint("b", b);
  return d;
}

bool property_dominance() {
  std::mt19937_64 rng(404);
  const char* endpoints[] = {"y1", "y2", "b"};
  const char* subsets[] = {"all", "g", "!g", "h", "!h"};
  const DfMode modes[] = {DfMode::Normal, DfMode::DfMin, DfMode::DfMax, DfMode::DfInd};
  const Alternative alts[] = {Alternative::TwoSided, Alternative::Greater, Alternative::Less};
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Dataset d = fuzz_trial(40 + 2 * (trial % 40), rng);
    std::vector<MarginalModel> models;
    const int r = 2 + trial % 4;
    while (static_cast<int>(models.size()) < r) {
      const int e = static_cast<int>(rng() % 3);
      ModelSpec s;
      s.endpoint = endpoints[e];
      s.subset = subsets[rng() % 5];
      s.family = e == 2 ? Family::BinomialLogit : Family::Gaussian;
      try {
        models.push_back(fit(d, s));
      } catch (const Error&) {
        // no MLE in a small subset; draw another model
      }
    }
    const AdjustedP a = adjusted_p(stack(models, modes[trial % 4]), alts[(trial / 4) % 3]);
    for (Index k = 0; k < a.p.size(); ++k)
      if (a.p(k) < a.unadjusted(k) - 2e-4 || a.p(k) > std::min(1.0, r * a.unadjusted(k)) + 2e-4) ++violations;
  }
  detail("(c) %d dominance violations over 200 stacks", violations);
  return violations == 0;
}

bool property_exact_correlations() {
  std::mt19937_64 rng(7);
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset d = fuzz_trial(60, rng);
    for (const char* y : {"y1", "b"}) {
      ModelSpec s;
      s.endpoint = y;
      s.family = std::string(y) == "b" ? Family::BinomialLogit : Family::Gaussian;
      s.subset = "g";
      ModelSpec t = s;
      t.subset = "!g";
      try {
        const MarginalModel m = fit(d, s);
        const MmmFit f = stack({m, m, fit(d, t)});
        ok = ok && f.c_hat(0, 1) == 1.0 && f.c_hat(0, 2) == 0.0 && f.c_hat(1, 2) == 0.0;
      } catch (const Error&) {
      }
    }
  }
  detail("(d) duplicated models correlate at exactly 1, disjoint subsets at exactly 0: %s", ok ? "yes" : "no");
  return ok;
}

bool property_score_sums() {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  int fits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset d = fuzz_trial(40 + trial, rng);
    for (const char* y : {"y1", "y2", "b"})
      for (const char* sub : {"all", "g", "!h"}) {
        ModelSpec s;
        s.endpoint = y;
        s.subset = sub;
        s.family = std::string(y) == "b" ? Family::BinomialLogit : Family::Gaussian;
        try {
          const MarginalModel m = fit(d, s);
          worst = std::max(worst, std::abs(m.score_contributions.sum()) / static_cast<double>(d.size()));
          ++fits;
        } catch (const Error&) {
        }
      }
  }
  detail("(e) largest |mean influence term| over %d fits: %.2e", fits, worst);
  return worst < 1e-9;
}

bool property_determinism() {
  auto once = [] {
    std::ostringstream out;
    std::vector<SimResult> results;
    for (HypothesisFamily f : {HypothesisFamily::TargetedOrTotal, HypothesisFamily::Any}) {
      Scenario s;
      s.total_n = 30;
      s.prop_target = 0.6;
      s.family = f;
      s.replications = 200;
      s.seed = 12345;
      results.push_back(run(s, all_methods()));
    }
    write_csv(out, results, all_methods());
    const casestudy::Analysis a = casestudy::analyze(casestudy::read_count_table(casestudy::bundled_table_path()));
    out << to_json(a.all());
    return out.str();
  };
  const bool same = once() == once();
  detail("(f) two runs byte-identical: %s", same ? "yes" : "no");
  return same;
}

Verdict properties() {
  const bool a = property_mc_oracle(), b = property_sidak(), c = property_dominance(),
             d = property_exact_correlations(), e = property_score_sums(), f = property_determinism();
  Verdict v;
  v.pass = a && b && c && d && e && f;
  v.summary = std::string("a ") + (a ? "ok" : "fail") + ", b " + (b ? "ok" : "fail") + ", c " + (c ? "ok" : "fail") +
              ", d " + (d ? "ok" : "fail") + ", e " + (e ? "ok" : "fail") + ", f " + (f ? "ok" : "fail");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::istringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(item);
    } else if (arg == "--reps" && i + 1 < argc) {
      g_reps = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only C1,C2,...] [--reps N]\n", argv[0]);
      return 2;
    }
  }

  struct Criterion {
    const char* id;
    const char* name;
    std::function<Verdict()> check;
  };
  const Criterion criteria[] = {
      {"C1", "case study", case_study},
      {"C2", "targeted-or-total error rates", targeted_or_total},
      {"C3", "any-family spot rows", any_family},
      {"C4", "overlap and two-endpoint designs", other_designs},
      {"C5", "power gains", power},
      {"C6", "property suite", properties},
  };

  bool all = true;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::printf("%s %s\n", c.id, c.name);
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.summary = std::string("error: ") + e.what();
    }
    all = all && v.pass;
    std::printf("%s %s %s: %s [%.0f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.summary.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
