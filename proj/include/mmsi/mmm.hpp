#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "mmsi/linmodels.hpp"
#include "mmsi/mvdist.hpp"
#include "mmsi/report.hpp"

namespace mmsi {

// Stacked multiple-marginal-models fit.
//
// Statistics use each model's own standard error; only their joint
// correlation is estimated, from the empirical covariance of the stacked
// per-subject influence terms.
struct MmmFit {
  std::vector<MarginalModel> models;
  Eigen::MatrixXd sigma_hat;  // (1/N) sum_i psi_i psi_i'
  CorrelationMatrix c_hat;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd statistics;
  Eigen::VectorXi per_model_df;
  DfMode df_mode = DfMode::Normal;

  Index size() const noexcept { return estimates.size(); }
  // Scalar df of the multivariate t reference (dfmin / dfmax), else none.
  std::optional<int> common_df() const;
  // Reference df of coordinate r.
  std::optional<int> coordinate_df(Index r) const;
};

MmmFit stack(std::vector<MarginalModel> models, DfMode mode = DfMode::Normal);

// Statistics mapped onto the scale of the joint reference distribution:
// unchanged for normal/dfmin/dfmax, Phi^{-1}(F_t(t_r; df_r)) for dfind. Sign
// flipped for alternative "less".
Eigen::VectorXd reference_statistics(const MmmFit& fit, Alternative alt);

struct AdjustedP {
  Eigen::VectorXd p;
  Eigen::VectorXd unadjusted;
  double quadrature_error = 0.0;
  bool converged = true;
};

// Single-step max-type adjustment for statistics whose joint law is N(0, corr)
// or t_df(corr). `stats` are already sign-flipped for alternative "less".
AdjustedP max_type_adjusted_p(const CorrelationMatrix& corr, const Eigen::Ref<const Eigen::VectorXd>& stats,
                              std::optional<int> df, Alternative alt, const QuadratureSettings& settings = {});
bool max_type_any_rejected(const CorrelationMatrix& corr, const Eigen::Ref<const Eigen::VectorXd>& stats,
                           std::optional<int> df, double alpha, Alternative alt,
                           const QuadratureSettings& settings = {});

// Single-step max-type adjusted p-values.
AdjustedP adjusted_p(const MmmFit& fit, Alternative alt, const QuadratureSettings& settings = {});

struct SimultaneousBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd critical;  // per-coordinate multiplier of the standard error
  double common_critical = 0.0;
  double quadrature_error = 0.0;
  bool converged = true;
};

SimultaneousBounds simultaneous_ci(const MmmFit& fit, double alpha, Alternative alt,
                                   const QuadratureSettings& settings = {});

// Whether the smallest adjusted p-value is below alpha. Avoids quadrature
// when the unadjusted or Bonferroni bound already decides.
bool any_rejected(const MmmFit& fit, double alpha, Alternative alt, const QuadratureSettings& settings = {});

InferenceReport mmm_report(const MmmFit& fit, double alpha, Alternative alt, const QuadratureSettings& settings = {},
                           bool exponentiate = false);

// Marginal Wald/t inference per model, unadjusted or Bonferroni-adjusted.
InferenceReport noadjust_report(const std::vector<MarginalModel>& models, double alpha, Alternative alt,
                                bool exponentiate = false);
InferenceReport bonferroni_report(const std::vector<MarginalModel>& models, double alpha, Alternative alt,
                                  bool exponentiate = false);

}  // namespace mmsi
