#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "mmsi/distributions.hpp"

using namespace mmsi;

TEST_CASE("normal quantile agrees with Boost across the range") {
  boost::math::normal_distribution<double> n01;
  for (double p : {1e-300, 1e-100, 1e-20, 1e-10, 1e-5, 0.001, 0.01, 0.025, 0.1, 0.3, 0.425, 0.5, 0.575, 0.7, 0.9,
                   0.975, 0.99, 0.999, 1 - 1e-10}) {
    const double ours = dist::norm_quantile(p);
    const double ref = boost::math::quantile(n01, p);
    CHECK(ours == doctest::Approx(ref).epsilon(1e-13));
  }
  CHECK(dist::norm_quantile(0.5) == 0.0);
}

TEST_CASE("normal cdf inverts the quantile") {
  for (double x = -30.0; x <= 0.0; x += 0.37) {
    CHECK(dist::norm_quantile(dist::norm_cdf(x)) == doctest::Approx(x).epsilon(1e-10));
    CHECK(dist::norm_quantile_upper(dist::norm_sf(-x)) == doctest::Approx(-x).epsilon(1e-10));
  }
  CHECK(dist::norm_sf(37.0) > 0.0);
  CHECK(dist::norm_quantile_upper(1e-30) == doctest::Approx(-dist::norm_quantile(1e-30)));
}

TEST_CASE("t functions agree with Boost") {
  for (double df : {1.0, 2.0, 5.0, 18.0, 96.0}) {
    boost::math::students_t_distribution<double> t(df);
    for (double x : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
      CHECK(dist::t_cdf(x, df) == doctest::Approx(boost::math::cdf(t, x)).epsilon(1e-12));
      CHECK(dist::t_sf(x, df) == doctest::Approx(boost::math::cdf(boost::math::complement(t, x))).epsilon(1e-12));
    }
    CHECK(dist::t_quantile(0.975, df) == doctest::Approx(boost::math::quantile(t, 0.975)).epsilon(1e-12));
    CHECK(dist::t_quantile_upper(0.025, df) == doctest::Approx(boost::math::quantile(t, 0.975)).epsilon(1e-12));
  }
}

TEST_CASE("scaled chi quantile is monotone and centred near one for large df") {
  double prev = 0.0;
  for (double p = 0.05; p < 1.0; p += 0.1) {
    const double q = dist::scaled_chi_quantile(p, 30.0);
    CHECK(q > prev);
    prev = q;
  }
  CHECK(dist::scaled_chi_quantile(0.5, 1e6) == doctest::Approx(1.0).epsilon(1e-3));
}
