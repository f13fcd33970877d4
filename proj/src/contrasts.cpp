#include "mmsi/contrasts.hpp"

#include <cmath>
#include <limits>

#include "mmsi/distributions.hpp"
#include "mmsi/error.hpp"

namespace mmsi {

CellMeansModel fit_cell_means(const Dataset& data, const std::string& endpoint, const std::string& subgroup) {
  const auto& y = data.endpoint(endpoint);
  const auto& flag = data.subgroup(subgroup);
  const auto& trt = data.treatment();
  CellMeansModel m;
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (Index i = 0; i < data.size(); ++i) {
    if (std::isnan(y(i)) || std::isnan(flag(i))) continue;
    const Index c = CellMeansModel::cell(trt(i), flag(i) == 1.0 ? 0 : 1);
    sum(c) += y(i);
    ++m.cell_counts(c);
  }
  for (Index c = 0; c < 4; ++c)
    if (m.cell_counts(c) == 0) throw Error(ErrorCode::EmptyCell, "cell " + std::to_string(c + 1) + " is empty");
  m.cell_means = sum.cwiseQuotient(m.cell_counts.cast<double>());
  const Index n = m.cell_counts.sum();
  m.residual_df = static_cast<int>(n - 4);
  if (m.residual_df < 1) throw Error(ErrorCode::EmptyCell, "need at least 5 observations across the four cells");

  double rss = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    if (std::isnan(y(i)) || std::isnan(flag(i))) continue;
    const double e = y(i) - m.cell_means(CellMeansModel::cell(trt(i), flag(i) == 1.0 ? 0 : 1));
    rss += e * e;
  }
  if (!(rss > 0.0)) throw Error(ErrorCode::ZeroVariance, "all within-cell residuals are zero");
  m.pooled_sd = std::sqrt(rss / m.residual_df);
  return m;
}

ContrastMatrix subgroup_contrasts(const Vector4i& counts) {
  const Eigen::Vector4d n = counts.cast<double>();
  ContrastMatrix c;
  c.rows.resize(3, 4);
  c.rows.row(0) << -1, 1, 0, 0;
  c.rows.row(1) << 0, 0, -1, 1;
  c.rows.row(2) << -n(0) / (n(0) + n(2)), n(1) / (n(1) + n(3)), -n(2) / (n(0) + n(2)), n(3) / (n(1) + n(3));
  c.labels = {"target", "complement", "total"};
  return c;
}

CorrelationMatrix contrast_correlation(const ContrastMatrix& contrasts, const Vector4i& counts) {
  const Eigen::Vector4d inv_n = counts.cast<double>().cwiseInverse();
  const Eigen::MatrixXd cov = contrasts.rows * inv_n.asDiagonal() * contrasts.rows.transpose();
  return CorrelationMatrix::from_covariance(cov);
}

ContrastStatistics contrast_statistics(const CellMeansModel& model, const ContrastMatrix& contrasts,
                                       std::span<const Index> family) {
  if (family.empty()) throw Error(ErrorCode::InvalidArgument, "contrast family is empty");
  const Eigen::Vector4d inv_n = model.cell_counts.cast<double>().cwiseInverse();
  ContrastStatistics s;
  const Index r = static_cast<Index>(family.size());
  s.estimates.resize(r);
  s.std_errors.resize(r);
  s.statistics.resize(r);
  for (Index k = 0; k < r; ++k) {
    if (family[k] < 0 || family[k] >= contrasts.rows.rows())
      throw Error(ErrorCode::InvalidArgument, "contrast family index out of range");
    const Eigen::Vector4d c = contrasts.rows.row(family[k]).transpose();
    s.estimates(k) = c.dot(model.cell_means);
    s.std_errors(k) = model.pooled_sd * std::sqrt(c.cwiseProduct(c).dot(inv_n));
    s.statistics(k) = s.estimates(k) / s.std_errors(k);
  }
  return s;
}

ContrastMatrix select_rows(const ContrastMatrix& contrasts, std::span<const Index> family) {
  ContrastMatrix sub;
  sub.rows.resize(static_cast<Index>(family.size()), 4);
  for (std::size_t k = 0; k < family.size(); ++k) {
    if (family[k] < 0 || family[k] >= contrasts.rows.rows())
      throw Error(ErrorCode::InvalidArgument, "contrast family index out of range");
    sub.rows.row(static_cast<Index>(k)) = contrasts.rows.row(family[k]);
    sub.labels.push_back(family[k] < static_cast<Index>(contrasts.labels.size()) ? contrasts.labels[family[k]]
                                                                                  : "contrast" + std::to_string(k + 1));
  }
  return sub;
}

InferenceReport cell_means_test(const CellMeansModel& model, const ContrastMatrix& contrasts,
                                std::span<const Index> family, double alpha, Alternative alt,
                                const QuadratureSettings& settings) {
  const ContrastStatistics s = contrast_statistics(model, contrasts, family);
  const ContrastMatrix sub = select_rows(contrasts, family);
  const CorrelationMatrix corr = contrast_correlation(sub, model.cell_counts);
  const Eigen::VectorXd oriented = alt == Alternative::Less ? Eigen::VectorXd(-s.statistics) : s.statistics;
  const int df = model.residual_df;
  const AdjustedP adj = max_type_adjusted_p(corr, oriented, df, alt, settings);
  const Quantile q = equicoordinate_quantile(corr, alpha, alt == Alternative::TwoSided ? Tail::TwoSided : Tail::OneSided,
                                             df, settings);
  InferenceReport rep;
  rep.method = "cellmeans";
  rep.alternative = alt;
  rep.alpha = alpha;
  rep.seed = settings.seed;
  rep.quadrature_error = std::max(adj.quadrature_error, q.prob_error);
  rep.critical_value = q.value;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < s.estimates.size(); ++k) {
    HypothesisResult h;
    h.label = sub.labels[k];
    h.estimate = s.estimates(k);
    h.std_error = s.std_errors(k);
    h.statistic = s.statistics(k);
    h.df = df;
    h.p_unadjusted = adj.unadjusted(k);
    h.p_adjusted = adj.p(k);
    h.lower = alt == Alternative::Less ? -inf : h.estimate - q.value * h.std_error;
    h.upper = alt == Alternative::Greater ? inf : h.estimate + q.value * h.std_error;
    h.rejected = h.p_adjusted < alpha;
    rep.hypotheses.push_back(std::move(h));
  }
  return rep;
}

bool cell_means_any_rejected(const CellMeansModel& model, const ContrastMatrix& contrasts,
                             std::span<const Index> family, double alpha, Alternative alt,
                             const QuadratureSettings& settings) {
  const ContrastStatistics s = contrast_statistics(model, contrasts, family);
  const CorrelationMatrix corr = contrast_correlation(select_rows(contrasts, family), model.cell_counts);
  const Eigen::VectorXd oriented = alt == Alternative::Less ? Eigen::VectorXd(-s.statistics) : s.statistics;
  return max_type_any_rejected(corr, oriented, model.residual_df, alpha, alt, settings);
}

}  // namespace mmsi
