#include "mmsi/reproduce.hpp"

#include <cmath>
#include <fstream>

#include "mmsi/csv.hpp"
#include "mmsi/error.hpp"

namespace mmsi::sim {

std::optional<double> PublishedTable::value(int total_n, double prop_target, Method m) const {
  for (std::size_t k = 0; k < methods.size(); ++k) {
    if (methods[k] != m) continue;
    for (const auto& r : rows)
      if (r.total_n == total_n && std::abs(r.prop_target - prop_target) < 1e-9) return r.values[k];
  }
  return std::nullopt;
}

PublishedTable read_published(const std::filesystem::path& path, const Scenario& design, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, "cannot read published table '" + path.string() + "'");
  const csv::Table t = csv::read(in);
  const int n_col = t.column("N"), p_col = t.column("prop_targ");
  if (n_col < 0 || p_col < 0) throw Error(ErrorCode::Schema, path.string() + " lacks N or prop_targ");
  PublishedTable out;
  out.name = name;
  out.design = design;
  std::vector<int> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (static_cast<int>(c) == n_col || static_cast<int>(c) == p_col) continue;
    out.methods.push_back(parse_method(t.header[c]));
    cols.push_back(static_cast<int>(c));
  }
  for (const auto& row : t.rows) {
    PublishedTable::Row r;
    r.total_n = std::stoi(row[n_col]);
    r.prop_target = std::stod(row[p_col]);
    for (int c : cols) r.values.push_back(std::stod(row[c]));
    out.rows.push_back(std::move(r));
  }
  return out;
}

std::vector<PublishedTable> published_tables(const std::string& which) {
  const std::filesystem::path dir = std::filesystem::path(MMSI_DATA_DIR) / "published";
  Scenario d;
  d.sd = 5.0;
  d.delta = 0.0;
  auto with = [&](HypothesisFamily f, bool overlap, int endpoints) {
    Scenario s = d;
    s.family = f;
    s.overlap = overlap;
    s.endpoints = endpoints;
    s.rho = endpoints == 2 ? 0.8 : 0.0;
    return s;
  };
  using HF = HypothesisFamily;
  if (which == "a3")
    return {read_published(dir / "fwer_targeted_or_total.csv", with(HF::TargetedOrTotal, false, 1), "a3")};
  if (which == "a4") return {read_published(dir / "fwer_any.csv", with(HF::Any, false, 1), "a4")};
  if (which == "a5")
    return {read_published(dir / "fwer_overlap_targeted_or_total.csv", with(HF::TargetedOrTotal, true, 1), "a5"),
            read_published(dir / "fwer_overlap_any.csv", with(HF::Any, true, 1), "a5-any")};
  if (which == "a6")
    return {read_published(dir / "fwer_two_endpoints_targeted_or_total.csv", with(HF::TargetedOrTotal, false, 2),
                           "a6")};
  throw Error(ErrorCode::InvalidArgument, "unknown table '" + which + "' (expected a3, a4, a5 or a6)");
}

double comparison_tolerance(double base, int replications) {
  if (replications >= 10000) return base;
  return base * std::sqrt(10000.0 / std::max(replications, 1));
}

PowerGain peak_power_gain(const Scenario& base, Method better, Method reference, const std::vector<double>& deltas,
                          const std::vector<double>& proportions, const RunOptions& options) {
  PowerGain best;
  best.peak = -1.0;
  const std::vector<HypothesisFamily> families = {HypothesisFamily::TargetedOrTotal, HypothesisFamily::Any};
  for (double delta : deltas)
    for (double prop : proportions) {
      Scenario s = base;
      s.delta = delta;
      s.prop_target = prop;
      for (const SimResult& r : run_families(s, families, {reference, better}, options)) {
        const double gain = r.rate(better) - r.rate(reference);
        if (gain > best.peak) {
          best.peak = gain;
          best.at = r.scenario;
          best.family = r.family;
        }
      }
    }
  return best;
}

std::vector<PowerClaim> power_claims(int replications) {
  auto claim = [&](const char* what, int n, double sd, int endpoints, Method better, double pp, double tol) {
    PowerClaim c;
    c.description = what;
    c.base.total_n = n;
    c.base.sd = sd;
    c.base.endpoints = endpoints;
    c.base.rho = endpoints == 2 ? 0.8 : 0.0;
    c.base.replications = replications;
    c.better = better;
    c.published_pp = pp;
    c.tolerance_pp = tol;
    return c;
  };
  return {claim("mmm.dfind - ttest, N=50, sd=10", 50, 10.0, 1, Method::MmmDfInd, 5.47, 1.5),
          claim("cellmeans - ttest, N=20, sd=2", 20, 2.0, 1, Method::CellMeans, 13.8, 2.0),
          claim("mmm.dfind - ttest, 2 endpoints, sd=5", 50, 5.0, 2, Method::MmmDfInd, 8.35, 2.0),
          claim("mmm.dfind - ttest, 2 endpoints, sd=10", 50, 10.0, 2, Method::MmmDfInd, 8.50, 2.0)};
}

const std::vector<double>& power_deltas() {
  static const std::vector<double> d = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  return d;
}

const std::vector<double>& power_proportions() {
  static const std::vector<double> p = {0.5, 0.6, 0.7, 0.8};
  return p;
}

}  // namespace mmsi::sim
