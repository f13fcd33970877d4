#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmsi/dataset.hpp"
#include "mmsi/mvdist.hpp"

namespace mmsi::sim {

// Which hypotheses count towards the error rate: total and targeted subgroup
// only, or every population including the complement.
enum class HypothesisFamily { TargetedOrTotal, Any };

const char* to_string(HypothesisFamily f) noexcept;
HypothesisFamily parse_family(const std::string& s);

enum class Method { NoAdjust, Bonferroni, CellMeans, Mmm, MmmDfMax, MmmDfMin, MmmDfInd };

// Column names of the published tables: Bonferroni-adjusted t-tests appear as "ttest".
const char* to_string(Method m) noexcept;
Method parse_method(const std::string& s);
const std::vector<Method>& all_methods();

struct Scenario {
  int total_n = 100;
  double sd = 5.0;
  double prop_target = 0.5;
  double delta = 0.0;
  int endpoints = 1;
  double rho = 0.0;
  bool overlap = false;
  HypothesisFamily family = HypothesisFamily::TargetedOrTotal;
  int replications = 10000;
  std::uint64_t seed = 20190322;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
  // Subjects per arm in the (first) targeted subgroup.
  int targeted_per_arm() const;
};

// One simulated trial. Level 0 ("control") is the first half of the subjects.
// Flags "target" (and "target2" with overlap); endpoints "y1" (and "y2").
Dataset generate(const Scenario& s, std::uint64_t replicate);

// Hypotheses of a family, endpoint by endpoint, in model order.
struct Hypothesis {
  std::string endpoint;
  std::string subset;  // "all", "target", "!target", ...
  bool false_null = false;
};
std::vector<Hypothesis> hypotheses(const Scenario& s, HypothesisFamily family);

struct MethodCounts {
  Method method = Method::NoAdjust;
  long any_rejection = 0;        // at least one hypothesis rejected
  long true_null_rejection = 0;  // at least one true null rejected
  long false_null_rejection = 0; // at least one false null rejected
};

struct SimResult {
  Scenario scenario;
  HypothesisFamily family = HypothesisFamily::TargetedOrTotal;
  std::vector<MethodCounts> counts;
  double wall_seconds = 0.0;

  // FWER when every hypothesis is a true null (delta = 0), power otherwise.
  double rate(Method m) const;
  const MethodCounts* find(Method m) const;
};

// Decisions only need the side of alpha, so a coarser target suffices.
inline QuadratureSettings simulation_quadrature() {
  QuadratureSettings q;
  q.target_abs_error = 1e-4;
  q.max_samples = Index{1} << 18;
  return q;
}

struct RunOptions {
  // Worker threads; 0 reads MMSI_THREADS and falls back to the hardware count.
  unsigned threads = 0;
  QuadratureSettings quadrature = simulation_quadrature();
};

unsigned resolve_threads(unsigned requested);

// Evaluates every method on the scenario's family. Throws IncompatibleMethod
// for cellmeans with overlapping subgroups or two endpoints.
SimResult run(const Scenario& s, const std::vector<Method>& methods, const RunOptions& options = {});

// Several families evaluated on the same simulated datasets.
std::vector<SimResult> run_families(const Scenario& s, const std::vector<HypothesisFamily>& families,
                                    const std::vector<Method>& methods, const RunOptions& options = {});

// ---- configuration -------------------------------------------------------

struct Study {
  std::vector<Scenario> scenarios;
  std::vector<Method> methods;
  bool methods_given = false;  // false when methods defaulted to all
};

// JSON with either a "scenarios" array or grid keys whose values may be
// scalars or arrays ("N", "prop_targ", "sd", "delta", "endpoints", "rho",
// "overlap", "family"), plus "replications", "seed" and "methods".
Study parse_study(const std::string& json_text);
Study load_study(const std::string& path);
// Explicit scenario list that parse_study reads back to the same study.
std::string to_json(const Study& study, int indent = 2);

// ---- CSV -----------------------------------------------------------------

// Wide layout matching the published tables: scenario columns, then one rate
// column per method ("NA" where a method does not apply).
void write_csv(std::ostream& out, const std::vector<SimResult>& results, const std::vector<Method>& methods);

struct CsvRow {
  Scenario scenario;
  std::vector<std::pair<Method, std::optional<double>>> rates;
};
std::vector<CsvRow> read_csv(std::istream& in);

bool supports(Method m, const Scenario& s);

}  // namespace mmsi::sim
