#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmsi/simulator.hpp"

namespace mmsi::sim {

// Published familywise error rates at sd = 5, delta = 0: one row per
// (N, prop_targ), one column per method.
struct PublishedTable {
  std::string name;
  Scenario design;  // N and prop_targ are filled per row
  std::vector<Method> methods;
  struct Row {
    int total_n = 0;
    double prop_target = 0.0;
    std::vector<double> values;  // aligned with methods
  };
  std::vector<Row> rows;

  std::optional<double> value(int total_n, double prop_target, Method m) const;
};

// Selectors: a3 (targeted or total), a4 (any), a5 (overlapping definitions,
// both families), a6 (two endpoints, targeted or total).
std::vector<PublishedTable> published_tables(const std::string& which);
PublishedTable read_published(const std::filesystem::path& path, const Scenario& design, const std::string& name);

// Acceptance band for a simulated rate: the base tolerance at 10,000
// replications, widened by sqrt(10000 / reps) below that.
double comparison_tolerance(double base, int replications);

struct PowerGain {
  double peak = 0.0;  // largest power difference, better minus reference
  Scenario at;        // scenario where it occurs
  HypothesisFamily family = HypothesisFamily::TargetedOrTotal;
};

// Power difference between two methods on the same datasets, maximized over
// the effect grid, the subgroup proportions and both hypothesis families.
// `base` fixes N, sd, endpoints, rho, replications and seed.
PowerGain peak_power_gain(const Scenario& base, Method better, Method reference, const std::vector<double>& deltas,
                          const std::vector<double>& proportions, const RunOptions& options = {});

// A published peak power gain with its comparison band, both in percentage points.
struct PowerClaim {
  std::string description;
  Scenario base;
  Method better = Method::MmmDfInd;
  Method reference = Method::Bonferroni;
  double published_pp = 0.0;
  double tolerance_pp = 0.0;
};

// The four published gains over Bonferroni-adjusted t-tests: mmm.dfind at
// N = 50, sd = 10; cellmeans at N = 20, sd = 2; mmm.dfind with two endpoints
// (rho = 0.8, N = 50) at sd = 5 and sd = 10.
std::vector<PowerClaim> power_claims(int replications = 10000);
// Effect grid 1..10 and subgroup proportions 0.5..0.8 searched for the peak.
const std::vector<double>& power_deltas();
const std::vector<double>& power_proportions();

}  // namespace mmsi::sim
