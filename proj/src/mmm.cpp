#include "mmsi/mmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmsi/distributions.hpp"
#include "mmsi/error.hpp"

namespace mmsi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CorrelationMatrix correlation_of(const Eigen::MatrixXd& sigma) {
  for (Index r = 0; r < sigma.rows(); ++r)
    if (!(sigma(r, r) > 0.0))
      throw Error(ErrorCode::DegenerateVariance, "score variance of model " + std::to_string(r) + " is zero");
  return CorrelationMatrix::from_covariance(sigma);
}

Eigen::MatrixXd score_covariance(const std::vector<MarginalModel>& models) {
  if (models.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one model to stack");
  const Index n = models.front().score_contributions.size();
  const Index r = static_cast<Index>(models.size());
  Eigen::MatrixXd psi(n, r);
  for (Index k = 0; k < r; ++k) {
    if (models[k].score_contributions.size() != n)
      throw Error(ErrorCode::MismatchedSubjectAxis, "model " + models[k].spec.display_label() +
                                                        " was fitted on a different subject axis");
    psi.col(k) = models[k].score_contributions;
  }
  Eigen::MatrixXd sigma = psi.transpose() * psi / static_cast<double>(n);
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace

std::optional<int> MmmFit::common_df() const {
  switch (df_mode) {
    case DfMode::DfMin: return per_model_df.minCoeff();
    case DfMode::DfMax: return per_model_df.maxCoeff();
    default: return std::nullopt;
  }
}

std::optional<int> MmmFit::coordinate_df(Index r) const {
  if (df_mode == DfMode::DfInd) return per_model_df(r);
  return common_df();
}

MmmFit stack(std::vector<MarginalModel> models, DfMode mode) {
  Eigen::MatrixXd sigma = score_covariance(models);
  CorrelationMatrix c = correlation_of(sigma);
  MmmFit fit{std::move(models), std::move(sigma), std::move(c), {}, {}, {}, {}, mode};
  const Index r = fit.c_hat.dim();
  fit.estimates.resize(r);
  fit.std_errors.resize(r);
  fit.statistics.resize(r);
  fit.per_model_df.resize(r);
  for (Index k = 0; k < r; ++k) {
    const auto& m = fit.models[k];
    fit.estimates(k) = m.coefficient;
    fit.std_errors(k) = m.standard_error;
    fit.statistics(k) = m.statistic();
    fit.per_model_df(k) = m.residual_df;
    if (!std::isfinite(fit.statistics(k)))
      throw Error(ErrorCode::DegenerateVariance, "non-finite statistic for " + m.spec.display_label());
  }
  if (mode != DfMode::Normal && fit.per_model_df.minCoeff() < 1)
    throw Error(ErrorCode::InvalidArgument, "t reference needs residual df >= 1 for every model");
  return fit;
}

Eigen::VectorXd reference_statistics(const MmmFit& fit, Alternative alt) {
  Eigen::VectorXd s = alt == Alternative::Less ? Eigen::VectorXd(-fit.statistics) : fit.statistics;
  if (fit.df_mode == DfMode::DfInd)
    for (Index r = 0; r < s.size(); ++r) s(r) = dist::norm_quantile_upper(dist::t_sf(s(r), fit.per_model_df(r)));
  return s;
}

namespace {

// Probability that the joint reference stays inside the acceptance region at
// threshold x (|.| <= x for two-sided, . <= x one-sided).
Probability acceptance(const CorrelationMatrix& corr, double x, std::optional<int> df, Alternative alt,
                       const QuadratureSettings& settings) {
  const Index r = corr.dim();
  if (alt == Alternative::TwoSided) {
    if (std::abs(x) == 0.0) return Probability{0.0, 0.0, true, 0};
    const Eigen::VectorXd up = Eigen::VectorXd::Constant(r, std::abs(x));
    return mv_rect_prob(corr, -up, up, df, settings);
  }
  if (x == -kInf) return Probability{0.0, 0.0, true, 0};
  return mv_rect_prob(corr, Eigen::VectorXd::Constant(r, -kInf), Eigen::VectorXd::Constant(r, x), df, settings);
}

double unadjusted_from_reference(double s, std::optional<int> df, Alternative alt) {
  if (alt == Alternative::TwoSided) return std::min(1.0, 2.0 * marginal_sf(std::abs(s), df));
  return marginal_sf(s, df);
}

}  // namespace

AdjustedP max_type_adjusted_p(const CorrelationMatrix& corr, const Eigen::Ref<const Eigen::VectorXd>& stats,
                              std::optional<int> df, Alternative alt, const QuadratureSettings& settings) {
  const Index r = corr.dim();
  if (stats.size() != r) throw Error(ErrorCode::InvalidArgument, "statistics do not match the correlation dimension");
  AdjustedP out;
  out.p.resize(r);
  out.unadjusted.resize(r);
  for (Index k = 0; k < r; ++k) {
    out.unadjusted(k) = unadjusted_from_reference(stats(k), df, alt);
    const Probability p = acceptance(corr, stats(k), df, alt, settings);
    out.p(k) = std::clamp(1.0 - p.value, 0.0, 1.0);
    out.quadrature_error = std::max(out.quadrature_error, p.error);
    out.converged = out.converged && p.converged;
  }
  return out;
}

bool max_type_any_rejected(const CorrelationMatrix& corr, const Eigen::Ref<const Eigen::VectorXd>& stats,
                           std::optional<int> df, double alpha, Alternative alt,
                           const QuadratureSettings& settings) {
  const double top = alt == Alternative::TwoSided ? stats.cwiseAbs().maxCoeff() : stats.maxCoeff();
  const double p1 = unadjusted_from_reference(top, df, alt);
  if (p1 >= alpha) return false;
  if (p1 * static_cast<double>(stats.size()) < alpha) return true;
  QuadratureSettings decide = settings;
  decide.decision_threshold = 1.0 - alpha;
  return 1.0 - acceptance(corr, top, df, alt, decide).value < alpha;
}

AdjustedP adjusted_p(const MmmFit& fit, Alternative alt, const QuadratureSettings& settings) {
  AdjustedP out = max_type_adjusted_p(fit.c_hat, reference_statistics(fit, alt), fit.common_df(), alt, settings);
  // dfind statistics live on the normal scale; report the unadjusted value
  // against each coordinate's own t marginal.
  for (Index k = 0; k < fit.size(); ++k) {
    const double raw = alt == Alternative::Less ? -fit.statistics(k) : fit.statistics(k);
    out.unadjusted(k) = unadjusted_from_reference(raw, fit.coordinate_df(k), alt);
  }
  return out;
}

SimultaneousBounds simultaneous_ci(const MmmFit& fit, double alpha, Alternative alt,
                                   const QuadratureSettings& settings) {
  const Index r = fit.size();
  const Tail tail = alt == Alternative::TwoSided ? Tail::TwoSided : Tail::OneSided;
  const Quantile q = equicoordinate_quantile(fit.c_hat, alpha, tail, fit.common_df(), settings);
  SimultaneousBounds b;
  b.common_critical = q.value;
  b.quadrature_error = q.prob_error;
  b.converged = q.converged;
  b.critical.resize(r);
  b.lower.resize(r);
  b.upper.resize(r);
  for (Index k = 0; k < r; ++k) {
    double c = q.value;
    if (fit.df_mode == DfMode::DfInd) c = dist::t_quantile_upper(dist::norm_sf(q.value), fit.per_model_df(k));
    b.critical(k) = c;
    const double half = c * fit.std_errors(k);
    b.lower(k) = alt == Alternative::Less ? -kInf : fit.estimates(k) - half;
    b.upper(k) = alt == Alternative::Greater ? kInf : fit.estimates(k) + half;
  }
  return b;
}

bool any_rejected(const MmmFit& fit, double alpha, Alternative alt, const QuadratureSettings& settings) {
  return max_type_any_rejected(fit.c_hat, reference_statistics(fit, alt), fit.common_df(), alpha, alt, settings);
}

namespace {

HypothesisResult base_row(const MarginalModel& m) {
  HypothesisResult h;
  h.label = m.spec.display_label();
  h.group = m.spec.group;
  h.endpoint = m.spec.endpoint;
  h.estimate = m.coefficient;
  h.std_error = m.standard_error;
  h.statistic = m.statistic();
  if (m.uses_t_reference()) h.df = m.residual_df;
  return h;
}

void set_bounds(HypothesisResult& h, double c, Alternative alt) {
  h.lower = alt == Alternative::Less ? -kInf : h.estimate - c * h.std_error;
  h.upper = alt == Alternative::Greater ? kInf : h.estimate + c * h.std_error;
}

InferenceReport marginal_report(const std::vector<MarginalModel>& models, double alpha, Alternative alt,
                                bool exponentiate, bool bonferroni) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  InferenceReport rep;
  rep.method = bonferroni ? "bonferroni" : "noadjust";
  rep.alternative = alt;
  rep.alpha = alpha;
  rep.exponentiate = exponentiate;
  const double k = bonferroni ? static_cast<double>(models.size()) : 1.0;
  const double level = alt == Alternative::TwoSided ? alpha / (2.0 * k) : alpha / k;
  for (const auto& m : models) {
    HypothesisResult h = base_row(m);
    h.p_unadjusted = marginal_p(m, alt);
    h.p_adjusted = std::min(1.0, k * h.p_unadjusted);
    const std::optional<int> df = h.df;
    set_bounds(h, marginal_quantile(1.0 - level, df), alt);
    h.rejected = h.p_adjusted < alpha;
    rep.hypotheses.push_back(std::move(h));
  }
  return rep;
}

}  // namespace

InferenceReport noadjust_report(const std::vector<MarginalModel>& models, double alpha, Alternative alt,
                                bool exponentiate) {
  return marginal_report(models, alpha, alt, exponentiate, false);
}

InferenceReport bonferroni_report(const std::vector<MarginalModel>& models, double alpha, Alternative alt,
                                  bool exponentiate) {
  return marginal_report(models, alpha, alt, exponentiate, true);
}

InferenceReport mmm_report(const MmmFit& fit, double alpha, Alternative alt, const QuadratureSettings& settings,
                           bool exponentiate) {
  const AdjustedP adj = adjusted_p(fit, alt, settings);
  const SimultaneousBounds ci = simultaneous_ci(fit, alpha, alt, settings);
  InferenceReport rep;
  rep.method = "mmm";
  rep.alternative = alt;
  rep.alpha = alpha;
  rep.df_mode = fit.df_mode;
  rep.seed = settings.seed;
  rep.quadrature_error = std::max(adj.quadrature_error, ci.quadrature_error);
  rep.critical_value = ci.common_critical;
  rep.exponentiate = exponentiate;
  for (Index k = 0; k < fit.size(); ++k) {
    HypothesisResult h = base_row(fit.models[k]);
    h.df = fit.coordinate_df(k);
    h.p_unadjusted = adj.unadjusted(k);
    h.p_adjusted = adj.p(k);
    h.lower = ci.lower(k);
    h.upper = ci.upper(k);
    h.rejected = h.p_adjusted < alpha;
    rep.hypotheses.push_back(std::move(h));
  }
  return rep;
}

}  // namespace mmsi
