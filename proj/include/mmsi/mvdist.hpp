#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "mmsi/error.hpp"

namespace mmsi {

using Eigen::Index;

// Symmetric, unit-diagonal, positive semidefinite matrix.
//
// Eigenvalues down to -1e-8 are accepted as numerical noise. Matrices with an
// eigenvalue below 1e-10 (e.g. two identical models, rho = 1) are clipped to
// the PSD cone and rescaled to unit diagonal before any factorization; the
// clipped copy is what the quadrature integrates against.
class CorrelationMatrix {
 public:
  explicit CorrelationMatrix(Eigen::MatrixXd m);

  static CorrelationMatrix identity(Index dim);
  static CorrelationMatrix equicorrelated(Index dim, double rho);

  // diag(cov)^{-1/2} * cov * diag(cov)^{-1/2}.
  template <typename Derived>
  static CorrelationMatrix from_covariance(const Eigen::MatrixBase<Derived>& cov);

  Index dim() const noexcept { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  const Eigen::MatrixXd& regularized() const noexcept { return regularized_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  Eigen::MatrixXd m_;
  Eigen::MatrixXd regularized_;
};

template <typename Derived>
CorrelationMatrix CorrelationMatrix::from_covariance(const Eigen::MatrixBase<Derived>& cov) {
  using Scalar = typename Derived::Scalar;
  const Index r = cov.rows();
  if (cov.cols() != r) throw Error(ErrorCode::InvalidArgument, "covariance must be square");
  for (Index i = 0; i < r; ++i)
    if (!(cov(i, i) > Scalar(0)))
      throw Error(ErrorCode::DegenerateVariance, "variance " + std::to_string(i) + " is not positive");
  // cov_ij / sqrt(cov_ii cov_jj) keeps identical columns at exactly 1.
  Eigen::MatrixXd c(r, r);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < r; ++j)
      c(i, j) = static_cast<double>(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)));
  c = (0.5 * (c + c.transpose())).eval();
  c = c.cwiseMax(-1.0).cwiseMin(1.0);
  c.diagonal().setOnes();
  return CorrelationMatrix(std::move(c));
}

inline constexpr std::uint64_t kDefaultQuadratureSeed = 20190322;

struct QuadratureSettings {
  double target_abs_error = 5e-5;
  // Cap on integrand evaluations across all sample stages.
  Index max_samples = Index{1} << 22;
  std::uint64_t seed = kDefaultQuadratureSeed;
  // Randomly shifted copies of each lattice rule.
  int shifts = 12;
  // When set, integration also stops as soon as the estimate is known to lie
  // on one side of this probability. Used when only a decision is needed.
  std::optional<double> decision_threshold;
};

struct Probability {
  double value = 0.0;
  double error = 0.0;  // about 3.5 standard errors of the estimate
  bool converged = true;
  Index samples = 0;
};

// P(lower <= X <= upper) for X ~ N(0, corr), or X ~ t_df(corr) when df is
// given. Bounds may be infinite. Integration uses the separation-of-variables
// transform with variable prioritization and randomized Korobov lattice rules,
// doubling the rule size until the error estimate meets the target. A result
// that misses the target is returned with converged = false.
Probability mv_rect_prob(const CorrelationMatrix& corr, const Eigen::Ref<const Eigen::VectorXd>& lower,
                         const Eigen::Ref<const Eigen::VectorXd>& upper, std::optional<int> df = std::nullopt,
                         const QuadratureSettings& settings = {});

enum class Tail { TwoSided, OneSided };

struct Quantile {
  double value = 0.0;
  double prob_error = 0.0;  // largest quadrature error met along the way
  bool converged = true;
};

// Common critical value c with P(|X_r| <= c for all r) = 1 - alpha (two-sided)
// or P(X_r <= c for all r) = 1 - alpha (one-sided). Root search bracketed by the
// unadjusted and the Bonferroni quantile, to within 1e-5.
Quantile equicoordinate_quantile(const CorrelationMatrix& corr, double alpha, Tail tail,
                                 std::optional<int> df = std::nullopt, const QuadratureSettings& settings = {});

// Marginal quantile of the reference distribution (normal or t_df).
double marginal_quantile(double p, std::optional<int> df);
// Marginal upper tail probability P(X > x).
double marginal_sf(double x, std::optional<int> df);

}  // namespace mmsi
