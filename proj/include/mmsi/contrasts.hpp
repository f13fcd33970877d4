#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "mmsi/dataset.hpp"
#include "mmsi/mmm.hpp"
#include "mmsi/mvdist.hpp"
#include "mmsi/report.hpp"

namespace mmsi {

using Vector4i = Eigen::Matrix<Index, 4, 1>;

// Two-way layout parameterized by its cell means, ordered by subgroup and
// within subgroup by treatment: (ref/target, test/target, ref/compl, test/compl).
struct CellMeansModel {
  Eigen::Vector4d cell_means = Eigen::Vector4d::Zero();
  Vector4i cell_counts = Vector4i::Zero();
  double pooled_sd = 0.0;
  int residual_df = 0;  // N - 4

  static constexpr Index cell(int treatment, int subgroup) { return 2 * subgroup + treatment; }
};

struct ContrastMatrix {
  Eigen::Matrix<double, Eigen::Dynamic, 4> rows;
  std::vector<std::string> labels;
};

// `subgroup` names the flag of the targeted subgroup; flag == 0 is the
// complement. Subjects with a missing flag or response are dropped.
CellMeansModel fit_cell_means(const Dataset& data, const std::string& endpoint, const std::string& subgroup);

// Target difference, complement difference, and the treatment main effect with
// each arm's subgroup means weighted by their share of that arm.
ContrastMatrix subgroup_contrasts(const Vector4i& counts);

// The contrasts listed in `family`, in that order.
ContrastMatrix select_rows(const ContrastMatrix& contrasts, std::span<const Index> family);

// Exact correlation of the contrast estimates: c_r' D c_s / sqrt(c_r' D c_r c_s' D c_s), D = diag(1/n).
CorrelationMatrix contrast_correlation(const ContrastMatrix& contrasts, const Vector4i& counts);

// Contrast estimates, standard errors and t statistics for the selected rows.
struct ContrastStatistics {
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd statistics;
};
ContrastStatistics contrast_statistics(const CellMeansModel& model, const ContrastMatrix& contrasts,
                                       std::span<const Index> family);

// Multiple contrast test with the known correlation and a multivariate t
// reference on residual_df degrees of freedom.
InferenceReport cell_means_test(const CellMeansModel& model, const ContrastMatrix& contrasts,
                                std::span<const Index> family, double alpha, Alternative alt,
                                const QuadratureSettings& settings = {});

bool cell_means_any_rejected(const CellMeansModel& model, const ContrastMatrix& contrasts,
                             std::span<const Index> family, double alpha, Alternative alt,
                             const QuadratureSettings& settings = {});

}  // namespace mmsi
