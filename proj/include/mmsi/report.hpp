#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmsi/linmodels.hpp"

namespace mmsi {

enum class DfMode { Normal, DfMin, DfMax, DfInd };

const char* to_string(DfMode m) noexcept;
DfMode parse_df_mode(const std::string& s);

struct HypothesisResult {
  std::string label;
  std::string group;
  std::string endpoint;
  double estimate = 0.0;  // effect scale (mean difference or log odds ratio)
  double std_error = 0.0;
  double statistic = 0.0;
  std::optional<int> df;  // reference df of this coordinate; none = normal
  double p_unadjusted = 1.0;
  double p_adjusted = 1.0;
  double lower = 0.0;  // simultaneous bounds, effect scale (may be infinite)
  double upper = 0.0;
  bool rejected = false;
};

struct InferenceReport {
  std::string method;  // noadjust | bonferroni | cellmeans | mmm
  Alternative alternative = Alternative::TwoSided;
  double alpha = 0.05;
  DfMode df_mode = DfMode::Normal;
  std::uint64_t seed = 0;
  double quadrature_error = 0.0;
  double critical_value = 0.0;  // common critical value on the joint reference scale
  bool exponentiate = false;    // effects are log odds ratios; report exp() as well
  std::vector<HypothesisResult> hypotheses;
};

std::string to_json(const InferenceReport& report, int indent = 2);
std::string to_json(const std::vector<InferenceReport>& reports, int indent = 2);
InferenceReport report_from_json(const std::string& text);
std::vector<InferenceReport> reports_from_json(const std::string& text);

// Aligned plain-text table: group, endpoint, effect, then "CI  p" per method.
// All reports must describe the same hypotheses in the same order.
std::string format_table(const std::vector<InferenceReport>& reports);

// Forest plot of one report: one row per hypothesis with the point estimate
// and its simultaneous interval, log axis when the report is exponentiated.
std::string forest_plot_svg(const InferenceReport& report, const std::string& title = {});

}  // namespace mmsi
