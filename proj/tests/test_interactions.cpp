#include <doctest.h>

#include <cmath>

#include "core/interactions.hpp"
#include "test_util.hpp"

using namespace mtg;
using namespace mtg::test;

namespace {

PairMatrix filled(int m, double v) { return PairMatrix(m, v); }

InteractionSpec two_mark_fiksel(double h, double R, double gamma,
                                bool within_only = false) {
  return InteractionSpec::fiksel(filled(2, h), filled(2, R), filled(2, gamma),
                                 within_only);
}

MarkedPointPattern pattern_with(std::vector<Point2> pts, std::vector<int> marks,
                                double side = 100.0) {
  MarkedPointPattern p;
  p.id = "x";
  p.window = PolygonalWindow::rectangle(0, 0, side, side);
  p.points = std::move(pts);
  p.marks = std::move(marks);
  return p;
}

}  // namespace

TEST_CASE("Fiksel pair potential") {
  auto spec = InteractionSpec::fiksel(filled(1, 0.481), filled(1, 27.11),
                                      filled(1, 0.110));
  SUBCASE("hardcore exclusion") {
    CHECK(fiksel_phi(spec, 0, 0, 0.1, 1.0) == kNegInf);
  }
  SUBCASE("range boundary is outside the interaction") {
    CHECK(fiksel_phi(spec, 0, 0, 27.11, 1.0) == 0.0);
    CHECK(fiksel_phi(spec, 0, 0, 30.0, 1.0) == 0.0);
  }
  SUBCASE("fitted same-type entries reproduce the published value") {
    auto cd14 = InteractionSpec::fiksel(filled(1, 0.498), filled(1, 27.11),
                                        filled(1, 0.110));
    const double phi = fiksel_phi(cd14, 0, 0, 10.0, 1.3052);
    CHECK(std::abs(phi - 0.43446) < 1e-4);
  }
}

TEST_CASE("alternative pair potentials follow the tabulated cases") {
  SUBCASE("Strauss") {
    CHECK(table2_phi(InteractionKind::Strauss, 3.0, 0, 2.0, std::log(0.5)) == 0.0);
    CHECK(table2_phi(InteractionKind::Strauss, 2.0, 0, 2.0, std::log(0.5)) ==
          doctest::Approx(std::log(0.5)));
  }
  SUBCASE("Hardcore excludes up to and including the range") {
    CHECK(table2_phi(InteractionKind::Hardcore, 1.9, 0, 2.0, 0) == kNegInf);
    CHECK(table2_phi(InteractionKind::Hardcore, 2.0, 0, 2.0, 0) == kNegInf);
    CHECK(table2_phi(InteractionKind::Hardcore, 2.1, 0, 2.0, 0) == 0.0);
  }
  SUBCASE("StraussHardcore with unit gamma vanishes on the band") {
    CHECK(table2_phi(InteractionKind::StraussHardcore, 1.0, 0.5, 2.0, 0.0) == 0.0);
    CHECK(table2_phi(InteractionKind::StraussHardcore, 0.4, 0.5, 2.0, 0.0) == kNegInf);
    CHECK(table2_phi(InteractionKind::StraussHardcore, 2.5, 0.5, 2.0, 0.0) == 0.0);
  }
}

TEST_CASE("coefficient layout") {
  auto spec = two_mark_fiksel(0.5, 5.0, 0.1);
  CHECK(spec.n_coefficients() == 3);
  CHECK(spec.coefficient_index(0, 0) == 0);
  CHECK(spec.coefficient_index(0, 1) == 1);
  CHECK(spec.coefficient_index(1, 0) == 1);
  CHECK(spec.coefficient_index(1, 1) == 2);

  auto within = two_mark_fiksel(0.5, 5.0, 0.1, true);
  CHECK(within.n_coefficients() == 2);
  CHECK(within.coefficient_index(0, 1) == -1);

  auto none = InteractionSpec::none(3);
  CHECK(none.n_coefficients() == 0);

  MarkSet marks({"A", "B"});
  auto names = spec.coefficient_names(marks);
  REQUIRE(names.size() == 3);
  CHECK(names[1] == "strength[A:B]");
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(
      InteractionSpec::fiksel(filled(1, 5.0), filled(1, 2.0), filled(1, 0.1)),
      Error);  // R <= h
  auto nan_h = filled(2, 0.5);
  nan_h.set(0, 1, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(InteractionSpec::fiksel(nan_h, filled(2, 5.0), filled(2, 0.1)),
                  Error);
  // within-only ignores cross entries entirely
  auto within =
      InteractionSpec::fiksel(nan_h, filled(2, 5.0), filled(2, 0.1), true);
  CHECK(within.n_coefficients() == 2);
}

TEST_CASE("hardcore distance estimation") {
  Cohort cohort;
  cohort.marks = MarkSet({"A", "B"});

  SUBCASE("single pattern with two types") {
    PatientRecord r;
    r.pattern = pattern_with({{1, 1}, {3, 1}}, {0, 1});
    cohort.patients.push_back(r);
    std::vector<std::pair<int, int>> missing;
    auto h = estimate_hardcore(cohort, &missing);
    CHECK(h(0, 1) == doctest::Approx(2.0));
    CHECK(std::isnan(h(0, 0)));  // only one A point
    REQUIRE(missing.size() == 2);
    CHECK(missing[0] == std::pair<int, int>{0, 0});
    CHECK(missing[1] == std::pair<int, int>{1, 1});
  }
  SUBCASE("minimum across replicates") {
    PatientRecord r1, r2;
    r1.pattern = pattern_with({{1, 1}, {4, 1}}, {0, 1});
    r2.pattern = pattern_with({{1, 1}, {2.5, 1}}, {0, 1});
    r2.pattern.id = "y";
    cohort.patients.push_back(r1);
    cohort.patients.push_back(r2);
    auto h = estimate_hardcore(cohort);
    CHECK(h(0, 1) == doctest::Approx(1.5));
  }
  SUBCASE("duplicate points are rejected with the patient named") {
    PatientRecord r;
    r.pattern = pattern_with({{1, 1}, {1, 1}}, {0, 0});
    r.pattern.id = "dup-patient";
    cohort.patients.push_back(r);
    CHECK_THROWS_WITH_AS(estimate_hardcore(cohort),
                         doctest::Contains("dup-patient"), Error);
  }
}

TEST_CASE("sufficient statistics") {
  auto spec = two_mark_fiksel(0.5, 5.0, 0.1);

  SUBCASE("empty pattern") {
    auto p = pattern_with({}, {});
    auto s = sufficient_statistics({50, 50}, 0, p, spec);
    REQUIRE(s.values.size() == 3);
    for (double v : s.values) CHECK(v == 0.0);
    CHECK_FALSE(s.hardcore_violated);
  }
  SUBCASE("single neighbour in the band") {
    auto p = pattern_with({{50, 50}}, {1});
    auto s = sufficient_statistics({52, 50}, 0, p, spec);
    CHECK(s.values[1] == doctest::Approx(std::exp(-0.1 * 2.0)));
    CHECK(s.values[0] == 0.0);
    CHECK_FALSE(s.hardcore_violated);
  }
  SUBCASE("hardcore violation flags the point") {
    auto p = pattern_with({{50, 50}}, {1});
    auto s = sufficient_statistics({50.2, 50}, 0, p, spec);
    CHECK(s.hardcore_violated);
  }
  SUBCASE("matches the brute-force sum on random neighbours") {
    Rng rng(3);
    std::vector<Point2> pts;
    std::vector<int> marks;
    for (int i = 0; i < 100; ++i) {
      pts.push_back({rng.uniform(45, 55), rng.uniform(45, 55)});
      marks.push_back(static_cast<int>(rng.index(2)));
    }
    auto p = pattern_with(pts, marks);
    const Point2 u{50, 50};
    auto s = sufficient_statistics(u, 0, p, spec);
    double expect[2] = {0, 0};
    bool violated = false;
    for (int i = 0; i < 100; ++i) {
      const double d = distance(u, p.points[i]);
      if (d < 0.5) violated = true;
      else if (d < 5.0) expect[p.marks[i]] += std::exp(-0.1 * d);
    }
    if (!violated) {
      CHECK(s.values[0] == doctest::Approx(expect[0]));
      CHECK(s.values[1] == doctest::Approx(expect[1]));
    }
    CHECK(s.hardcore_violated == violated);
  }
  SUBCASE("locality: points beyond the range never contribute") {
    auto p = pattern_with({{50, 50}, {80, 80}}, {1, 1});
    auto near_only = pattern_with({{50, 50}}, {1});
    auto s1 = sufficient_statistics({52, 50}, 0, p, spec);
    auto s2 = sufficient_statistics({52, 50}, 0, near_only, spec);
    CHECK(s1.values == s2.values);
  }
  SUBCASE("self-exclusion at data points") {
    auto p = pattern_with({{50, 50}, {52, 50}}, {0, 0});
    auto s = sufficient_statistics(p.points[0], 0, p, spec, /*exclude=*/0);
    CHECK_FALSE(s.hardcore_violated);
    CHECK(s.values[0] == doctest::Approx(std::exp(-0.1 * 2.0)));
  }
  SUBCASE("within-only zeroes cross statistics and cross hardcore") {
    auto spec_w = two_mark_fiksel(0.5, 5.0, 0.1, true);
    auto p = pattern_with({{50, 50}}, {1});
    auto s = sufficient_statistics({50.1, 50}, 0, p, spec_w);  // cross, inside h
    CHECK_FALSE(s.hardcore_violated);
    for (double v : s.values) CHECK(v == 0.0);
    auto s_same = sufficient_statistics({50.1, 50}, 1, p, spec_w);
    CHECK(s_same.hardcore_violated);
  }
  SUBCASE("Strauss statistics count points in the band") {
    auto strauss = InteractionSpec::strauss(filled(2, 5.0));
    auto p = pattern_with({{50, 50}, {53, 50}, {70, 70}}, {1, 1, 1});
    auto s = sufficient_statistics({51, 50}, 0, p, strauss);
    CHECK(s.values[strauss.coefficient_index(0, 1)] == doctest::Approx(2.0));
    CHECK_FALSE(s.hardcore_violated);
  }
  SUBCASE("Hardcore kind only raises the flag") {
    auto hc = InteractionSpec::hardcore_model(filled(2, 1.0));
    auto p = pattern_with({{50, 50}}, {1});
    CHECK(sufficient_statistics({50.5, 50}, 0, p, hc).hardcore_violated);
    CHECK_FALSE(sufficient_statistics({52, 50}, 0, p, hc).hardcore_violated);
    CHECK(hc.n_coefficients() == 0);
  }
}

TEST_CASE("hardcore estimate is consistent with the data") {
  Rng rng(9);
  Cohort cohort;
  cohort.marks = MarkSet({"A", "B"});
  for (int k = 0; k < 3; ++k) {
    PatientRecord r;
    std::vector<Point2> pts;
    std::vector<int> marks;
    for (int i = 0; i < 60; ++i) {
      pts.push_back({rng.uniform(0, 30), rng.uniform(0, 30)});
      marks.push_back(static_cast<int>(rng.index(2)));
    }
    r.pattern = pattern_with(pts, marks, 30.0);
    r.pattern.id = "p" + std::to_string(k);
    cohort.patients.push_back(r);
  }
  auto h = estimate_hardcore(cohort);
  auto spec = InteractionSpec::fiksel(h, filled(2, 40.0), filled(2, 0.1));
  for (const auto& patient : cohort.patients)
    for (std::size_t i = 0; i < patient.pattern.size(); ++i) {
      auto s = sufficient_statistics(patient.pattern.points[i],
                                     patient.pattern.marks[i], patient.pattern,
                                     spec, static_cast<long>(i));
      CHECK_FALSE(s.hardcore_violated);
    }
}

TEST_CASE("spatial hash matches the linear scan") {
  Rng rng(21);
  std::vector<Point2> pts;
  std::vector<int> marks;
  for (int i = 0; i < 2500; ++i) {
    pts.push_back({rng.uniform(0, 100), rng.uniform(0, 100)});
    marks.push_back(static_cast<int>(rng.index(2)));
  }
  auto p = pattern_with(pts, marks);
  auto spec = two_mark_fiksel(0.2, 4.0, 0.15);
  PatternNeighborhood nbhd(p, spec.max_interaction_distance());
  for (int trial = 0; trial < 200; ++trial) {
    const Point2 u{rng.uniform(0, 100), rng.uniform(0, 100)};
    auto fast = nbhd.stats(u, 0, spec);
    auto slow = sufficient_statistics(u, 0, p, spec);
    CHECK(fast.hardcore_violated == slow.hardcore_violated);
    if (!fast.hardcore_violated)
      for (std::size_t c = 0; c < fast.values.size(); ++c)
        CHECK(fast.values[c] == doctest::Approx(slow.values[c]));
  }
}
