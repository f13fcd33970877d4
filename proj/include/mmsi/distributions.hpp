#pragma once

#include <cmath>
#include <numbers>

// Univariate distribution helpers. Normal functions are implemented inline
// because the quadrature kernel calls them millions of times; t and chi
// functions forward to Boost.Math.
namespace mmsi::dist {

template <typename Scalar>
inline Scalar norm_cdf(Scalar x) {
  using std::erfc;
  return Scalar(0.5) * erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

// Upper tail 1 - Phi(x), accurate for large x.
template <typename Scalar>
inline Scalar norm_sf(Scalar x) {
  return norm_cdf(-x);
}

// Wichura's AS241 (PPND16), relative accuracy about 1e-16.
double norm_quantile(double p);

// Phi^{-1}(1 - q) computed without forming 1 - q.
inline double norm_quantile_upper(double q) { return -norm_quantile(q); }

double t_cdf(double x, double df);
double t_sf(double x, double df);
double t_quantile(double p, double df);
double t_quantile_upper(double q, double df);

// Quantile of sqrt(chi^2_df / df).
double scaled_chi_quantile(double p, double df);

}  // namespace mmsi::dist
