#include "mmsi/mvdist.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>
#include <vector>

#include "mmsi/distributions.hpp"
#include "mmsi/lattice.hpp"

namespace mmsi {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kNegativeEigenTol = -1e-8;
constexpr double kClipEigen = 1e-10;
constexpr double kDegenerateVariance = 1e-10;
constexpr double kErrorFactor = 3.5;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// ---------------------------------------------------------------------------
// CorrelationMatrix
// ---------------------------------------------------------------------------

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  const Index r = m_.rows();
  if (r < 1 || m_.cols() != r) throw Error(ErrorCode::InvalidArgument, "correlation matrix must be square, dim >= 1");
  if (!m_.allFinite()) throw Error(ErrorCode::InvalidArgument, "correlation matrix has non-finite entries");
  for (Index i = 0; i < r; ++i) {
    if (std::abs(m_(i, i) - 1.0) > kSymmetryTol)
      throw Error(ErrorCode::InvalidArgument, "correlation matrix diagonal must be 1");
    for (Index j = 0; j < i; ++j) {
      if (std::abs(m_(i, j) - m_(j, i)) > kSymmetryTol)
        throw Error(ErrorCode::InvalidArgument, "correlation matrix is not symmetric");
      if (std::abs(m_(i, j)) > 1.0 + kSymmetryTol)
        throw Error(ErrorCode::InvalidArgument, "correlation outside [-1, 1]");
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m_);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < kNegativeEigenTol)
    throw Error(ErrorCode::NotPSD, "smallest eigenvalue " + std::to_string(min_eig));
  if (min_eig < kClipEigen) {
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd rebuilt = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    const Eigen::VectorXd scale = rebuilt.diagonal().cwiseSqrt().cwiseInverse();
    regularized_ = scale.asDiagonal() * rebuilt * scale.asDiagonal();
    regularized_ = (0.5 * (regularized_ + regularized_.transpose())).eval();
    regularized_.diagonal().setOnes();
  } else {
    regularized_ = m_;
  }
}

CorrelationMatrix CorrelationMatrix::identity(Index dim) {
  return CorrelationMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

CorrelationMatrix CorrelationMatrix::equicorrelated(Index dim, double rho) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(dim, dim, rho);
  m.diagonal().setOnes();
  return CorrelationMatrix(std::move(m));
}

// ---------------------------------------------------------------------------
// Separation-of-variables integrand
// ---------------------------------------------------------------------------

namespace {

double truncated_normal_mean(double lo, double hi) {
  const double p = dist::norm_cdf(hi) - dist::norm_cdf(lo);
  auto pdf = [](double x) { return std::isinf(x) ? 0.0 : std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  if (p > 1e-300) return (pdf(lo) - pdf(hi)) / p;
  if (std::isinf(lo)) return hi;
  if (std::isinf(hi)) return lo;
  return 0.5 * (lo + hi);
}

// Cholesky factor of the (reordered) correlation matrix together with the
// matching limits. Variables are ordered so that the one with the smallest
// expected conditional interval probability comes first. Rows whose
// conditional variance vanishes are linear in the free variables before them;
// each is divided by its last nonzero coefficient and folded into the limits
// of that variable, so a singular matrix integrates over fewer dimensions
// with a smooth integrand instead of an indicator.
class SovIntegrand {
 public:
  SovIntegrand(const Eigen::MatrixXd& sigma, Eigen::VectorXd a, Eigen::VectorXd b)
      : m_(sigma.rows()), L_(Eigen::MatrixXd::Zero(m_, m_)), a_(std::move(a)), b_(std::move(b)),
        inv_diag_(m_), folded_(m_) {
    Eigen::MatrixXd s = sigma;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m_);
    for (Index i = 0; i < m_; ++i) {
      Index best = i;
      double best_prob = kInf;
      for (Index j = i; j < m_; ++j) {
        const double v = s(j, j) - L_.row(j).head(i).squaredNorm();
        double prob = 2.0;
        if (v > kDegenerateVariance) {
          const double sd = std::sqrt(v);
          const double shift = L_.row(j).head(i).dot(y.head(i));
          prob = dist::norm_cdf((b_(j) - shift) / sd) - dist::norm_cdf((a_(j) - shift) / sd);
        }
        if (prob < best_prob) {
          best_prob = prob;
          best = j;
        }
      }
      if (best != i) {
        s.row(i).swap(s.row(best));
        s.col(i).swap(s.col(best));
        L_.row(i).swap(L_.row(best));
        std::swap(a_(i), a_(best));
        std::swap(b_(i), b_(best));
      }
      const double v = s(i, i) - L_.row(i).head(i).squaredNorm();
      if (v <= kDegenerateVariance) break;  // every remaining row is degenerate too
      const double lii = std::sqrt(v);
      L_(i, i) = lii;
      inv_diag_(i) = 1.0 / lii;
      for (Index j = i + 1; j < m_; ++j) L_(j, i) = (s(j, i) - L_.row(j).head(i).dot(L_.row(i).head(i))) / lii;
      const double shift = L_.row(i).head(i).dot(y.head(i));
      y(i) = truncated_normal_mean((a_(i) - shift) / lii, (b_(i) - shift) / lii);
      ++free_;
    }
    for (Index i = free_; i < m_; ++i) {
      Index last = -1;
      for (Index j = 0; j < free_; ++j)
        if (std::abs(L_(i, j)) > kFoldTolerance) last = j;
      if (last < 0) {
        // A coordinate that is identically zero: the rectangle either holds it or not.
        if (a_(i) > 0.0 || b_(i) < 0.0) empty_ = true;
        continue;
      }
      folded_[last].push_back(i);
    }
    sampled_ = std::max<Index>(free_ - 1, 0);
    rows_.resize(m_ * m_);
    for (Index i = 0; i < m_; ++i)
      for (Index j = 0; j < m_; ++j) rows_[i * m_ + j] = L_(i, j);
  }

  int sampled() const noexcept { return static_cast<int>(sampled_); }
  Index dim() const noexcept { return m_; }

  // Integrand at uniforms w[0..sampled()), limits scaled by `radius`.
  double operator()(const double* w, double radius, double* y) const {
    if (empty_) return 0.0;
    double prod = 1.0;
    for (Index i = 0; i < free_; ++i) {
      const double* row = &rows_[i * m_];
      double shift = 0.0;
      for (Index j = 0; j < i; ++j) shift += row[j] * y[j];
      double lo = (a_(i) * radius - shift) * inv_diag_(i);
      double hi = (b_(i) * radius - shift) * inv_diag_(i);
      for (Index r : folded_[i]) {
        const double* dep = &rows_[r * m_];
        double dep_shift = 0.0;
        for (Index j = 0; j < i; ++j) dep_shift += dep[j] * y[j];
        double l = (a_(r) * radius - dep_shift) / dep[i];
        double h = (b_(r) * radius - dep_shift) / dep[i];
        if (dep[i] < 0.0) std::swap(l, h);
        lo = std::max(lo, l);
        hi = std::min(hi, h);
      }
      if (!(lo < hi)) return 0.0;
      const double d = dist::norm_cdf(lo);
      const double e = dist::norm_cdf(hi);
      prod *= e - d;
      if (!(prod > 0.0)) return 0.0;
      if (i < sampled_) y[i] = dist::norm_quantile(d + w[i] * (e - d));
    }
    return prod;
  }

 private:
  static constexpr double kFoldTolerance = 1e-8;

  Index m_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd a_, b_, inv_diag_;
  std::vector<std::vector<Index>> folded_;  // degenerate rows attached to each free variable
  std::vector<double> rows_;
  Index free_ = 0;
  Index sampled_ = 0;
  bool empty_ = false;
};

inline double baker(double x) { return 1.0 - std::abs(2.0 * x - 1.0); }

// Radii sqrt(chi2_df/df) at the first lattice coordinate of one shifted rule,
// point k at [2k] and its antithetic partner at [2k+1]. Only depends on
// (df, seed, stage, shift), so repeated calls reuse them.
const std::vector<double>& chi_radii(int df, std::uint64_t seed, int stage, int shift, std::int64_t n) {
  using Key = std::tuple<int, std::uint64_t, int, int>;
  thread_local std::map<Key, std::vector<double>> cache;
  thread_local std::vector<double> scratch;
  constexpr std::int64_t kMaxCachedPoints = 4099;
  constexpr std::size_t kMaxEntries = 48;

  auto fill = [&](std::vector<double>& out) {
    out.resize(2 * n);
    const double delta = lattice::shift_component(seed, stage, shift, 0);
    for (std::int64_t k = 0; k < n; ++k) {
      double x = static_cast<double>(k) / static_cast<double>(n) + delta;
      x = baker(x - std::floor(x));
      out[2 * k] = dist::scaled_chi_quantile(x, df);
      out[2 * k + 1] = dist::scaled_chi_quantile(1.0 - x, df);
    }
  };
  if (n > kMaxCachedPoints) {
    fill(scratch);
    return scratch;
  }
  const Key key{df, seed, stage, shift};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  if (cache.size() >= kMaxEntries) cache.clear();
  auto& slot = cache[key];
  fill(slot);
  return slot;
}

Probability integrate(const SovIntegrand& f, std::optional<int> df, const QuadratureSettings& settings) {
  const bool student = df.has_value();
  const int dims = f.sampled() + (student ? 1 : 0);
  std::vector<double> y(f.dim()), x(std::max(dims, 1)), xa(std::max(dims, 1));
  const int offset = student ? 1 : 0;

  if (dims == 0) {
    Probability p;
    p.value = f(nullptr, 1.0, y.data());
    p.samples = 1;
    return p;
  }

  Probability result;
  result.converged = false;
  double mean = 0.0, var = 0.0;
  bool have = false;
  Index used = 0;
  const int shifts = std::max(settings.shifts, 2);

  for (int stage = 0;; ++stage) {
    const std::int64_t n = lattice::stage_size(stage);
    const Index cost = 2 * n * shifts;
    if (have && used + cost > settings.max_samples) break;
    const auto& rule = lattice::korobov_rule(n, dims);
    const double inv_n = 1.0 / static_cast<double>(n);

    double sum = 0.0, sumsq = 0.0;
    std::vector<double> delta(dims);
    for (int s = 0; s < shifts; ++s) {
      for (int j = 0; j < dims; ++j) delta[j] = lattice::shift_component(settings.seed, stage, s, j);
      const std::vector<double>* radii = student ? &chi_radii(*df, settings.seed, stage, s, n) : nullptr;
      double acc = 0.0;
      for (std::int64_t k = 0; k < n; ++k) {
        for (int j = offset; j < dims; ++j) {
          double u = static_cast<double>((k * rule.z[j]) % n) * inv_n + delta[j];
          u = baker(u - std::floor(u));
          x[j] = u;
          xa[j] = 1.0 - u;
        }
        const double r1 = student ? (*radii)[2 * k] : 1.0;
        const double r2 = student ? (*radii)[2 * k + 1] : 1.0;
        acc += 0.5 * (f(x.data() + offset, r1, y.data()) + f(xa.data() + offset, r2, y.data()));
      }
      const double est = acc * inv_n;
      sum += est;
      sumsq += est * est;
    }
    used += cost;
    const double stage_mean = sum / shifts;
    const double stage_var = std::max(0.0, (sumsq - shifts * stage_mean * stage_mean) / (shifts * (shifts - 1.0)));
    // Each stage is reported on its own. Pooling stages by their estimated
    // variances favours small stages whose shifts happened to agree, which
    // understates the error of rare-event probabilities.
    mean = stage_mean;
    var = stage_var;
    have = true;
    result.value = mean;
    result.error = kErrorFactor * std::sqrt(var);
    result.samples = used;
    if (result.error <= settings.target_abs_error ||
        (settings.decision_threshold && std::abs(result.value - *settings.decision_threshold) > result.error)) {
      result.converged = true;
      break;
    }
  }
  result.value = std::clamp(result.value, 0.0, 1.0);
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

double marginal_quantile(double p, std::optional<int> df) {
  return df ? dist::t_quantile(p, *df) : dist::norm_quantile(p);
}

double marginal_sf(double x, std::optional<int> df) { return df ? dist::t_sf(x, *df) : dist::norm_sf(x); }

Probability mv_rect_prob(const CorrelationMatrix& corr, const Eigen::Ref<const Eigen::VectorXd>& lower,
                         const Eigen::Ref<const Eigen::VectorXd>& upper, std::optional<int> df,
                         const QuadratureSettings& settings) {
  const Index m = corr.dim();
  if (lower.size() != m || upper.size() != m)
    throw Error(ErrorCode::InvalidArgument, "limit vectors do not match the correlation dimension");
  if (!(settings.target_abs_error > 0.0)) throw Error(ErrorCode::InvalidArgument, "target_abs_error must be > 0");
  if (df && *df < 1) throw Error(ErrorCode::InvalidArgument, "df must be a positive integer");
  for (Index i = 0; i < m; ++i)
    if (std::isnan(lower(i)) || std::isnan(upper(i)) || !(lower(i) < upper(i)))
      throw Error(ErrorCode::InvalidArgument, "need lower < upper in every coordinate");

  if (m == 1) {
    Probability p;
    p.value = df ? dist::t_cdf(upper(0), *df) - dist::t_cdf(lower(0), *df)
                 : dist::norm_cdf(upper(0)) - dist::norm_cdf(lower(0));
    p.value = std::clamp(p.value, 0.0, 1.0);
    p.samples = 1;
    return p;
  }
  SovIntegrand f(corr.regularized(), lower, upper);
  return integrate(f, df, settings);
}

Quantile equicoordinate_quantile(const CorrelationMatrix& corr, double alpha, Tail tail, std::optional<int> df,
                                 const QuadratureSettings& settings) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  const Index r = corr.dim();
  const double per_side = tail == Tail::TwoSided ? alpha / 2.0 : alpha;
  double lo = marginal_quantile(1.0 - per_side, df);
  double hi = marginal_quantile(1.0 - per_side / static_cast<double>(r), df);
  Quantile q;
  if (r == 1) {
    q.value = lo;
    return q;
  }

  const Eigen::VectorXd neg_inf = Eigen::VectorXd::Constant(r, -kInf);
  // Points far from the root only need the sign of coverage - target, so they
  // are integrated coarsely first and refined only when the sign is unclear.
  QuadratureSettings coarse = settings;
  coarse.target_abs_error = std::max(settings.target_abs_error, 2e-3);
  auto integrate_at = [&](double c, const QuadratureSettings& s) {
    const Eigen::VectorXd upper = Eigen::VectorXd::Constant(r, c);
    return tail == Tail::TwoSided ? mv_rect_prob(corr, -upper, upper, df, s)
                                  : mv_rect_prob(corr, neg_inf, upper, df, s);
  };
  auto coverage = [&](double c) {
    Probability p = integrate_at(c, coarse);
    if (std::abs(p.value - (1.0 - alpha)) <= 2.0 * p.error) p = integrate_at(c, settings);
    q.prob_error = std::max(q.prob_error, p.error);
    q.converged = q.converged && p.converged;
    return p.value;
  };
  // Illinois regula falsi on coverage(c) - (1 - alpha). The lattice points are
  // fixed by the seed, so the estimated coverage is a smooth monotone function
  // of c and the iteration converges in a handful of integrations.
  const double target = 1.0 - alpha;
  double g_lo = coverage(lo) - target;
  if (g_lo >= 0.0) {
    q.value = lo;
    return q;
  }
  double g_hi = coverage(hi) - target;
  if (g_hi <= 0.0) {
    q.value = hi;
    return q;
  }
  int side = 0;
  double c = 0.5 * (lo + hi);
  for (int it = 0; it < 60 && hi - lo > 1e-5; ++it) {
    c = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
    if (!(c > lo && c < hi)) c = 0.5 * (lo + hi);
    const double g = coverage(c) - target;
    if (std::abs(g) < 1e-10) break;
    if (g < 0.0) {
      lo = c;
      g_lo = g;
      if (side == -1) g_hi *= 0.5;
      side = -1;
    } else {
      hi = c;
      g_hi = g;
      if (side == 1) g_lo *= 0.5;
      side = 1;
    }
    c = 0.5 * (lo + hi);
  }
  q.value = c;
  return q;
}

}  // namespace mmsi
