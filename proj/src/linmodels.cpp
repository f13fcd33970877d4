#include "mmsi/linmodels.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mmsi/distributions.hpp"
#include "mmsi/error.hpp"

namespace mmsi {

const char* to_string(Family f) noexcept {
  return f == Family::Gaussian ? "gaussian" : "binomial";
}

const char* to_string(Alternative a) noexcept {
  switch (a) {
    case Alternative::TwoSided: return "two-sided";
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
  }
  return "two-sided";
}

Family parse_family(const std::string& s) {
  if (s == "gaussian" || s == "gaussian-identity") return Family::Gaussian;
  if (s == "binomial" || s == "binomial-logit" || s == "logit") return Family::BinomialLogit;
  throw Error(ErrorCode::Schema, "unknown family '" + s + "'");
}

Alternative parse_alternative(const std::string& s) {
  if (s == "two-sided" || s == "two.sided") return Alternative::TwoSided;
  if (s == "greater") return Alternative::Greater;
  if (s == "less") return Alternative::Less;
  throw Error(ErrorCode::Schema, "unknown alternative '" + s + "'");
}

namespace {

struct Rows {
  std::vector<Index> index;  // subjects used
  Index n1 = 0, n0 = 0;
};

Rows usable_rows(const Dataset& data, const ModelSpec& spec) {
  const auto& y = data.endpoint(spec.endpoint);
  const auto mask = data.subset_mask(spec.subset);
  Rows rows;
  for (Index i = 0; i < data.size(); ++i) {
    if (!mask(i) || std::isnan(y(i))) continue;
    rows.index.push_back(i);
    (data.treatment()(i) == 1 ? rows.n1 : rows.n0)++;
  }
  if (rows.n0 == 0 || rows.n1 == 0)
    throw Error(ErrorCode::DegenerateSubset,
                "a treatment arm is empty for " + spec.endpoint + " within subset '" + spec.subset + "'");
  return rows;
}

}  // namespace

MarginalModel fit_ols(const Dataset& data, const ModelSpec& spec) {
  if (spec.family != Family::Gaussian) throw Error(ErrorCode::InvalidArgument, "fit_ols needs a gaussian spec");
  const auto rows = usable_rows(data, spec);
  if (rows.n0 + rows.n1 < 3)
    throw Error(ErrorCode::DegenerateSubset, "fewer than 3 observations for " + spec.display_label());
  const auto& y = data.endpoint(spec.endpoint);
  const auto& trt = data.treatment();

  double sum[2] = {0.0, 0.0};
  for (Index i : rows.index) sum[trt(i)] += y(i);
  const double mean[2] = {sum[0] / rows.n0, sum[1] / rows.n1};

  double rss = 0.0;
  MarginalModel m;
  m.spec = spec;
  m.score_contributions = Eigen::VectorXd::Zero(data.size());
  const double n_total = static_cast<double>(data.size());
  for (Index i : rows.index) {
    const double e = y(i) - mean[trt(i)];
    rss += e * e;
    m.score_contributions(i) = n_total * (trt(i) == 1 ? e / rows.n1 : -e / rows.n0);
  }
  m.n_used = rows.n0 + rows.n1;
  m.residual_df = static_cast<int>(m.n_used - 2);
  if (!(rss > 0.0)) throw Error(ErrorCode::ZeroVariance, "all residuals are zero for " + spec.display_label());
  m.coefficient = mean[1] - mean[0];
  const double sigma2 = rss / m.residual_df;
  m.standard_error = std::sqrt(sigma2 * (1.0 / rows.n0 + 1.0 / rows.n1));
  return m;
}

MarginalModel fit_logit(const Dataset& data, const ModelSpec& spec) {
  if (spec.family != Family::BinomialLogit)
    throw Error(ErrorCode::InvalidArgument, "fit_logit needs a binomial spec");
  const auto rows = usable_rows(data, spec);
  const auto& yall = data.endpoint(spec.endpoint);
  const auto& trt = data.treatment();
  const Index n = static_cast<Index>(rows.index.size());

  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  double events[2] = {0.0, 0.0};
  for (Index k = 0; k < n; ++k) {
    const Index i = rows.index[k];
    const double v = yall(i);
    if (v != 0.0 && v != 1.0)
      throw Error(ErrorCode::Schema, "endpoint '" + spec.endpoint + "' row " + std::to_string(i) + " is not 0/1");
    X(k, 0) = 1.0;
    X(k, 1) = trt(i);
    y(k) = v;
    events[trt(i)] += v;
  }
  if (events[0] == 0.0 || events[1] == 0.0 || events[0] == rows.n0 || events[1] == rows.n1)
    throw Error(ErrorCode::Separation, "an arm has all-0 or all-1 responses for " + spec.display_label());

  auto deviance = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    double dev = 0.0;
    for (Index k = 0; k < n; ++k) {
      // -2 log-likelihood, log(1 + exp(eta)) evaluated stably
      const double e = eta(k);
      const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      dev += 2.0 * (log1pexp - y(k) * e);
    }
    return dev;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(2);
  double dev = deviance(beta);
  bool converged = false;
  Eigen::Vector2d w_mu;
  for (int iter = 0; iter < 25; ++iter) {
    const Eigen::VectorXd eta = X * beta;
    const Eigen::VectorXd mu = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
    const Eigen::VectorXd w = mu.cwiseProduct((1.0 - mu.array()).matrix());
    const Eigen::VectorXd z = eta + (y - mu).cwiseQuotient(w);
    const Eigen::Matrix2d xtwx = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd next = xtwx.ldlt().solve(X.transpose() * w.cwiseProduct(z));
    double next_dev = deviance(next);
    // Halve only on a real increase: near the optimum the deviance is flat to
    // rounding and a full Newton step is what converges.
    const double slack = 1e-9 * (std::abs(dev) + 1.0);
    for (int half = 0; half < 30 && !(next_dev <= dev + slack); ++half) {
      next = 0.5 * (next + beta);
      next_dev = deviance(next);
    }
    const double change = std::abs(dev - next_dev);
    const double step = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    dev = next_dev;
    if (change < 1e-8 && step < 1e-10) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error(ErrorCode::NoConvergence, "IRLS hit 25 iterations for " + spec.display_label());

  const Eigen::VectorXd mu = (X * beta).unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
  const Eigen::VectorXd w = mu.cwiseProduct((1.0 - mu.array()).matrix());
  const Eigen::Matrix2d info_inv = (X.transpose() * w.asDiagonal() * X).inverse();

  MarginalModel m;
  m.spec = spec;
  m.coefficient = beta(1);
  m.standard_error = std::sqrt(info_inv(1, 1));
  m.n_used = n;
  m.residual_df = static_cast<int>(n - 2);
  m.score_contributions = Eigen::VectorXd::Zero(data.size());
  const double n_total = static_cast<double>(data.size());
  for (Index k = 0; k < n; ++k)
    m.score_contributions(rows.index[k]) = n_total * info_inv.row(1).dot(X.row(k)) * (y(k) - mu(k));
  return m;
}

MarginalModel fit(const Dataset& data, const ModelSpec& spec) {
  return spec.family == Family::Gaussian ? fit_ols(data, spec) : fit_logit(data, spec);
}

double marginal_p(const MarginalModel& model, Alternative alt) {
  const double t = model.statistic();
  auto upper = [&](double x) {
    return model.uses_t_reference() ? dist::t_sf(x, model.residual_df) : dist::norm_sf(x);
  };
  switch (alt) {
    case Alternative::Greater: return upper(t);
    case Alternative::Less: return upper(-t);
    case Alternative::TwoSided: return std::min(1.0, 2.0 * upper(std::abs(t)));
  }
  return 1.0;
}

}  // namespace mmsi
