#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mmsi/error.hpp"
#include "mmsi/simulator.hpp"

using namespace mmsi;
using namespace mmsi::sim;

namespace {

Scenario small(int n = 40, double prop = 0.5, int reps = 200) {
  Scenario s;
  s.total_n = n;
  s.prop_target = prop;
  s.replications = reps;
  return s;
}

RunOptions single_thread() {
  RunOptions o;
  o.threads = 1;
  return o;
}

}  // namespace

TEST_CASE("subgroup sizes follow the rounded proportion within each arm") {
  const Scenario s = small(20, 0.5);
  CHECK(s.targeted_per_arm() == 5);
  const Dataset d = generate(s, 0);
  CHECK(d.size() == 20);
  for (int arm = 0; arm < 2; ++arm) {
    int target = 0, count = 0;
    for (Index i = 0; i < d.size(); ++i)
      if (d.treatment()(i) == arm) {
        ++count;
        target += d.subgroup("target")(i) == 1.0;
      }
    CHECK(count == 10);
    CHECK(target == 5);
  }
  CHECK(small(50, 0.7).targeted_per_arm() == 18);  // 17.5 rounds away from zero
  CHECK(small(100, 0.8).targeted_per_arm() == 40);
}

TEST_CASE("the effect shifts only treated subjects of the targeted subgroup") {
  Scenario s = small(40, 0.5);
  Scenario shifted = s;
  shifted.delta = 3.0;
  const Dataset a = generate(s, 7), b = generate(shifted, 7);
  for (Index i = 0; i < a.size(); ++i) {
    const bool hit = a.treatment()(i) == 1 && a.subgroup("target")(i) == 1.0;
    CHECK(b.endpoint("y1")(i) - a.endpoint("y1")(i) == doctest::Approx(hit ? 3.0 : 0.0));
  }
}

TEST_CASE("two endpoints have the requested correlation") {
  Scenario s = small(4000);
  s.endpoints = 2;
  s.rho = 0.8;
  s.sd = 3.0;
  const Dataset d = generate(s, 1);
  const Eigen::ArrayXd a = d.endpoint("y1").array() - d.endpoint("y1").mean();
  const Eigen::ArrayXd b = d.endpoint("y2").array() - d.endpoint("y2").mean();
  const double r = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
  CHECK(r == doctest::Approx(0.8).epsilon(0.03));
  CHECK(std::sqrt(b.square().sum() / (d.size() - 1)) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("overlapping definitions keep their size in each arm") {
  Scenario s = small(40, 0.6);
  s.overlap = true;
  const Dataset d = generate(s, 3);
  CHECK(d.subgroup("target2").head(20).sum() == 12);
  CHECK(d.subgroup("target2").tail(20).sum() == 12);
}

TEST_CASE("hypothesis families list every population") {
  Scenario s = small();
  CHECK(hypotheses(s, HypothesisFamily::TargetedOrTotal).size() == 2);
  CHECK(hypotheses(s, HypothesisFamily::Any).size() == 3);
  s.overlap = true;
  CHECK(hypotheses(s, HypothesisFamily::Any).size() == 5);
  s.overlap = false;
  s.endpoints = 2;
  s.delta = 1.0;
  const auto h = hypotheses(s, HypothesisFamily::Any);
  CHECK(h.size() == 6);
  CHECK(h[2].subset == "!target");
  CHECK_FALSE(h[2].false_null);
  CHECK(h[3].endpoint == "y2");
  CHECK(h[3].false_null);
}

TEST_CASE("runs are deterministic and independent of the thread count") {
  const Scenario s = small(30, 0.6, 150);
  RunOptions three;
  three.threads = 3;
  const SimResult a = run(s, all_methods(), single_thread());
  const SimResult b = run(s, all_methods(), single_thread());
  const SimResult c = run(s, all_methods(), three);
  for (std::size_t k = 0; k < a.counts.size(); ++k) {
    CHECK(a.counts[k].true_null_rejection == b.counts[k].true_null_rejection);
    CHECK(a.counts[k].true_null_rejection == c.counts[k].true_null_rejection);
    CHECK(a.counts[k].any_rejection == c.counts[k].any_rejection);
  }
  std::ostringstream x, y;
  write_csv(x, {a}, all_methods());
  write_csv(y, {c}, all_methods());
  CHECK(x.str() == y.str());
}

TEST_CASE("nested decisions order the error rates") {
  for (HypothesisFamily f : {HypothesisFamily::TargetedOrTotal, HypothesisFamily::Any}) {
    for (int n : {20, 60}) {
      Scenario s = small(n, 0.7, 300);
      s.family = f;
      const SimResult r = run(s, all_methods(), single_thread());
      auto rate = [&](Method m) { return r.rate(m); };
      CHECK(rate(Method::NoAdjust) >= rate(Method::Mmm));
      CHECK(rate(Method::Mmm) >= rate(Method::MmmDfInd));
      CHECK(rate(Method::Mmm) >= rate(Method::MmmDfMax));
      CHECK(rate(Method::MmmDfMax) >= rate(Method::MmmDfMin));
      CHECK(rate(Method::MmmDfInd) >= rate(Method::Bonferroni));
      CHECK(rate(Method::NoAdjust) >= rate(Method::CellMeans));
    }
  }
}

TEST_CASE("power counts false nulls and grows with the effect") {
  Scenario s = small(60, 0.5, 200);
  s.delta = 1.0;
  const double low = run(s, {Method::MmmDfInd}, single_thread()).rate(Method::MmmDfInd);
  s.delta = 6.0;
  const SimResult high = run(s, {Method::MmmDfInd}, single_thread());
  CHECK(high.rate(Method::MmmDfInd) > low);
  CHECK(high.counts[0].false_null_rejection <= high.counts[0].any_rejection);
}

TEST_CASE("invalid scenarios and incompatible methods are rejected") {
  Scenario s = small();
  s.replications = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK_THROWS_AS(small(21).validate(), Error);
  CHECK_THROWS_AS(small(20, 0.95).validate(), Error);
  Scenario o = small();
  o.overlap = true;
  try {
    run(o, {Method::CellMeans});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompatibleMethod);
  }
  CHECK_FALSE(supports(Method::CellMeans, o));
  CHECK(supports(Method::MmmDfInd, o));
}

TEST_CASE("method and family names round-trip") {
  for (Method m : all_methods()) CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("bonferroni") == Method::Bonferroni);
  CHECK(std::string(to_string(Method::Bonferroni)) == "ttest");
  CHECK(parse_family("any") == HypothesisFamily::Any);
  CHECK(parse_family("targeted-or-total") == HypothesisFamily::TargetedOrTotal);
  CHECK_THROWS_AS(parse_method("holm"), Error);
}

TEST_CASE("grid configs expand to one scenario per combination") {
  const Study st = parse_study(R"({"N": [20, 50, 100, 200, 500], "prop_targ": [0.5, 0.6, 0.7, 0.8],
                                   "sd": 5, "family": "targeted_or_total", "replications": 10000})");
  CHECK(st.scenarios.size() == 20);
  CHECK(st.methods.size() == 7);
  CHECK_FALSE(st.methods_given);
  CHECK(st.scenarios.back().total_n == 500);
  CHECK(st.scenarios.back().prop_target == 0.8);
  const Study back = parse_study(to_json(st));
  REQUIRE(back.scenarios.size() == st.scenarios.size());
  for (std::size_t i = 0; i < st.scenarios.size(); ++i) {
    CHECK(back.scenarios[i].total_n == st.scenarios[i].total_n);
    CHECK(back.scenarios[i].prop_target == st.scenarios[i].prop_target);
    CHECK(back.scenarios[i].seed == st.scenarios[i].seed);
  }
  const Study listed = parse_study(R"({"scenarios": [{"N": 30, "delta": 2, "family": "any"}], "methods": ["mmm"]})");
  CHECK(listed.scenarios.size() == 1);
  CHECK(listed.scenarios[0].family == HypothesisFamily::Any);
  CHECK(listed.methods_given);
  CHECK_THROWS_AS(parse_study(R"({"N": "many"})"), Error);
  CHECK_THROWS_AS(parse_study("[1, 2]"), Error);
}

TEST_CASE("simulation CSV round-trips through the reader") {
  Scenario s = small(20, 0.5, 40);
  s.overlap = true;
  const std::vector<Method> methods = {Method::NoAdjust, Method::CellMeans, Method::MmmDfInd};
  const SimResult r = run(s, {Method::NoAdjust, Method::MmmDfInd}, single_thread());
  std::stringstream text;
  write_csv(text, {r}, methods);
  const auto rows = read_csv(text);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].scenario.total_n == 20);
  CHECK(rows[0].scenario.overlap);
  CHECK(rows[0].scenario.replications == 40);
  REQUIRE(rows[0].rates.size() == 3);
  CHECK_FALSE(rows[0].rates[1].second.has_value());
  CHECK(*rows[0].rates[2].second == r.rate(Method::MmmDfInd));
}
