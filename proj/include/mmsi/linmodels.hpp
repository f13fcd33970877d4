#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "mmsi/dataset.hpp"

namespace mmsi {

enum class Family { Gaussian, BinomialLogit };
enum class Alternative { TwoSided, Greater, Less };

const char* to_string(Family f) noexcept;
const char* to_string(Alternative a) noexcept;
Family parse_family(const std::string& s);
Alternative parse_alternative(const std::string& s);

struct ModelSpec {
  std::string endpoint;
  std::string subset = "all";  // "all", "<flag>" or "!<flag>"
  Family family = Family::Gaussian;
  Alternative direction = Alternative::TwoSided;
  std::string label;  // defaults to "endpoint|subset"
  std::string group;  // display only, e.g. "S1 (TIA)"

  std::string display_label() const { return label.empty() ? endpoint + "|" + subset : label; }
};

// One fitted two-arm regression, effect = level 1 minus level 0.
struct MarginalModel {
  ModelSpec spec;
  double coefficient = 0.0;      // mean difference or log odds ratio
  double standard_error = 0.0;   // model-based: pooled two-sample or inverse information
  Index n_used = 0;
  int residual_df = 0;           // n_used - 2
  // Per-subject influence terms psi_i on the full subject axis, scaled so that
  // coefficient - truth ~ (1/N) sum psi_i. Zero for excluded subjects.
  Eigen::VectorXd score_contributions;

  bool uses_t_reference() const noexcept { return spec.family == Family::Gaussian; }
  double statistic() const noexcept { return coefficient / standard_error; }
};

MarginalModel fit_ols(const Dataset& data, const ModelSpec& spec);

// Maximum likelihood by IRLS from a zero start with step halving; stops when
// the absolute deviance change drops below 1e-8 and no coefficient moves by
// more than 1e-10 (at most 25 iterations).
MarginalModel fit_logit(const Dataset& data, const ModelSpec& spec);

// Model list in JSON: either an array of objects or {"models": [...]} with
// keys endpoint, subset, family, direction, label, group. Only endpoint is
// required. An "alternative" at the top level becomes the default direction.
std::vector<ModelSpec> parse_model_specs(const std::string& json_text);

// Schema error naming the first endpoint or subgroup column the data lacks.
void check_model_specs(const Dataset& data, const std::vector<ModelSpec>& specs);

// Dispatches on spec.family.
MarginalModel fit(const Dataset& data, const ModelSpec& spec);

// Unadjusted p-value of the model's Wald/t statistic: t with residual df for
// gaussian models, standard normal for logit models.
double marginal_p(const MarginalModel& model, Alternative alt);

}  // namespace mmsi
