#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mmsi/casestudy.hpp"
#include "mmsi/error.hpp"

using namespace mmsi;
using namespace mmsi::casestudy;

namespace {

long events_in(const Dataset& d, const std::string& endpoint, int arm, const std::string& subgroup) {
  long n = 0;
  for (Index i = 0; i < d.size(); ++i)
    if (d.treatment()(i) == arm && d.subgroup(subgroup)(i) == 1.0) n += d.endpoint(endpoint)(i) == 1.0;
  return n;
}

double cross_product_or(long a_events, long a_total, long b_events, long b_total) {
  return (static_cast<double>(b_events) / (b_total - b_events)) /
         (static_cast<double>(a_events) / (a_total - a_events));
}

}  // namespace

TEST_CASE("bundled count table loads") {
  const CountTable t = read_count_table(bundled_table_path());
  CHECK(t.rows.size() == 12);
  CHECK(t.treatments() == std::vector<std::string>{"Apixaban", "Aspirin"});
  CHECK(t.endpoints() == std::vector<std::string>{"Ischemic", "Hemorrhag", "Stroke"});
  CHECK(t.subgroups() == std::vector<std::string>{"S1", "S2"});
  CHECK(t.at("Aspirin", "Ischemic", "S1").events == 27);
  CHECK(t.at("Apixaban", "Stroke", "S2").total() == 2417);
}

TEST_CASE("count tables round-trip through CSV") {
  const CountTable t = read_count_table(bundled_table_path());
  std::stringstream text;
  write_count_table(text, t);
  const CountTable back = read_count_table(text);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].endpoint == t.rows[i].endpoint);
    CHECK(back.rows[i].events == t.rows[i].events);
    CHECK(back.rows[i].non_events == t.rows[i].non_events);
  }
}

TEST_CASE("every layout preserves the marginal counts of the component endpoints") {
  const CountTable t = read_count_table(bundled_table_path());
  for (EventLayout layout : {EventLayout::Aligned, EventLayout::Stacked, EventLayout::Composite}) {
    const Dataset d = expand(t, layout);
    CHECK(d.size() == 390 + 2417 + 374 + 2415);
    CHECK(d.levels()[0] == "Apixaban");
    for (const char* e : {"Ischemic", "Hemorrhag"})
      for (const char* g : {"S1", "S2"})
        for (int arm = 0; arm < 2; ++arm)
          CHECK(events_in(d, e, arm, g) == t.at(d.levels()[arm], e, g).events);
  }
}

TEST_CASE("stacked layout keeps the composite counts and covers its components") {
  const CountTable t = read_count_table(bundled_table_path());
  const Dataset d = expand(t, EventLayout::Stacked);
  for (const char* g : {"S1", "S2"})
    for (int arm = 0; arm < 2; ++arm) CHECK(events_in(d, "Stroke", arm, g) == t.at(d.levels()[arm], "Stroke", g).events);
  for (Index i = 0; i < d.size(); ++i)
    if (d.endpoint("Ischemic")(i) == 1.0 && d.endpoint("Hemorrhag")(i) == 0.0) CHECK(d.endpoint("Stroke")(i) == 1.0);
}

TEST_CASE("composite layout rebuilds the last endpoint as the union of the others") {
  const CountTable t = read_count_table(bundled_table_path());
  const Dataset d = expand(t, EventLayout::Composite);
  for (Index i = 0; i < d.size(); ++i) {
    const bool any = d.endpoint("Ischemic")(i) == 1.0 || d.endpoint("Hemorrhag")(i) == 1.0;
    CHECK((d.endpoint("Stroke")(i) == 1.0) == any);
  }
  CHECK(events_in(d, "Stroke", 1, "S1") == 31);
}

TEST_CASE("masked endpoints are missing outside their subgroup") {
  const Dataset d = expand(read_count_table(bundled_table_path()));
  const Eigen::VectorXd& m = d.endpoint("Stroke.S1");
  for (Index i = 0; i < d.size(); ++i)
    CHECK(std::isnan(m(i)) == (d.subgroup("S1")(i) == 0.0));
}

TEST_CASE("odds ratios under the stacked layout equal the table cross products") {
  const CountTable t = read_count_table(bundled_table_path());
  const Analysis a = analyze(t, 0.05, case_study_quadrature(), EventLayout::Stacked);
  REQUIRE(a.mmm.hypotheses.size() == 9);
  CHECK(a.mmm.hypotheses[0].label == "Global/Ischemic");
  std::size_t k = 0;
  for (const std::string g : {"", "S1", "S2"}) {
    for (const std::string e : {"Ischemic", "Hemorrhag", "Stroke"}) {
      long ea = 0, na = 0, eb = 0, nb = 0;
      for (const std::string s : {"S1", "S2"}) {
        if (!g.empty() && s != g) continue;
        ea += t.at("Apixaban", e, s).events;
        na += t.at("Apixaban", e, s).total();
        eb += t.at("Aspirin", e, s).events;
        nb += t.at("Aspirin", e, s).total();
      }
      CHECK(std::exp(a.mmm.hypotheses[k].estimate) == doctest::Approx(cross_product_or(ea, na, eb, nb)).epsilon(1e-8));
      ++k;
    }
  }
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(a.noadjust.hypotheses[i].p_unadjusted <= a.mmm.hypotheses[i].p_adjusted + 2e-4);
    CHECK(a.mmm.hypotheses[i].p_adjusted <= a.bonferroni.hypotheses[i].p_adjusted + 2e-4);
  }
}

TEST_CASE("malformed count tables name the offending line or column") {
  std::istringstream missing("treatment,endpoint,subgroup,events\nA,E,S1,3\n");
  CHECK_THROWS_WITH_AS(read_count_table(missing), doctest::Contains("non_events"), Error);
  std::istringstream negative("treatment,endpoint,subgroup,events,non_events\nA,E,S1,3,4\nB,E,S1,-1,4\n");
  CHECK_THROWS_WITH_AS(read_count_table(negative), doctest::Contains("line 3"), Error);
  std::istringstream dup("treatment,endpoint,subgroup,events,non_events\nA,E,S1,3,4\nA,E,S1,3,4\n");
  CHECK_THROWS_AS(read_count_table(dup), Error);
  std::istringstream uneven(
      "treatment,endpoint,subgroup,events,non_events\nA,E,S1,3,4\nB,E,S1,3,4\nA,F,S1,3,5\nB,F,S1,3,4\n");
  try {
    expand(read_count_table(uneven));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentTotals);
  }
  CHECK(looks_like_count_table({"treatment", "endpoint", "subgroup", "events", "non_events"}));
  CHECK_FALSE(looks_like_count_table({"id", "treatment", "y"}));
}
