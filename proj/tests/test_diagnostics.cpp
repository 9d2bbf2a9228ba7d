#include <doctest.h>

#include <cmath>

#include "core/diagnostics.hpp"
#include "test_util.hpp"

using namespace mtg;
using namespace mtg::test;

namespace {

Cohort csr_cohort(Rng& rng, int n_points, double side, const std::string& id) {
  Cohort cohort;
  cohort.marks = MarkSet({"A"});
  PatientRecord r;
  r.pattern.id = id;
  r.pattern.window = PolygonalWindow::rectangle(0, 0, side, side);
  for (int i = 0; i < n_points; ++i) {
    r.pattern.points.push_back({rng.uniform(0, side), rng.uniform(0, side)});
    r.pattern.marks.push_back(0);
  }
  cohort.patients.push_back(std::move(r));
  return cohort;
}

FitOptions plain_options() {
  FitOptions o;
  o.use_offset = false;
  o.use_covariates = false;
  o.fit_grid = 32;
  return o;
}

}  // namespace

TEST_CASE("raw residual of an intercept-only fit vanishes on its own data") {
  Rng rng(61);
  auto cohort = csr_cohort(rng, 120, 1.0, "own");
  auto model = fit_cohort(cohort, InteractionSpec::none(1), plain_options());
  ModelEvaluator eval(model, 0);
  const TileGrid& grid = *model.context->quadratures[0].grid;
  const double raw = residual_total(eval, 0, ResidualKind::Raw, grid);
  CHECK(std::abs(raw) < 1e-6 * 120);
}

TEST_CASE("residual field") {
  Rng rng(62);
  auto cohort = csr_cohort(rng, 80, 2.0, "field");
  auto model = fit_cohort(cohort, InteractionSpec::none(1), plain_options());
  ModelEvaluator eval(model, 0);
  const TileGrid& grid = *model.context->quadratures[0].grid;

  SUBCASE("field sums to the total for every kind") {
    for (ResidualKind kind :
         {ResidualKind::Raw, ResidualKind::Pearson, ResidualKind::Inverse}) {
      auto field = residual_field(eval, 0, kind, grid);
      double sum = 0.0;
      for (double v : field) sum += v;
      CHECK(sum == doctest::Approx(residual_total(eval, 0, kind, grid))
                       .epsilon(1e-9));
    }
  }
  SUBCASE("an empty tile carries minus lambda times its area") {
    auto field = residual_field(eval, 0, ResidualKind::Raw, grid);
    const double lambda = std::exp(model.coefficients[0]);
    const auto& pattern = model.context->patterns[0];
    for (std::size_t c = 0; c < grid.n_cells(); ++c) {
      bool has_data = false;
      for (std::size_t i = 0; i < pattern.size(); ++i)
        if (grid.cell_index(pattern.points[i]) == c) has_data = true;
      if (!has_data && grid.tile_area(c) > 0) {
        CHECK(field[c] ==
              doctest::Approx(-lambda * grid.tile_area(c)).epsilon(1e-9));
        break;
      }
    }
  }
  SUBCASE("matches a brute-force recomputation per tile") {
    auto field = residual_field(eval, 0, ResidualKind::Raw, grid);
    const auto& pattern = model.context->patterns[0];
    for (std::size_t c = 0; c < std::min<std::size_t>(grid.n_cells(), 50); ++c) {
      double expect = -eval.conditional_intensity(grid.representative(c), 0) *
                      grid.tile_area(c);
      for (std::size_t i = 0; i < pattern.size(); ++i)
        if (grid.cell_index(pattern.points[i]) == c) expect += 1.0;
      CHECK(field[c] == doctest::Approx(expect));
    }
  }
}

TEST_CASE("empty mark gives minus the integrated intensity") {
  Rng rng(63);
  Cohort cohort;
  cohort.marks = MarkSet({"A", "B"});
  PatientRecord r;
  r.pattern.id = "partial";
  r.pattern.window = PolygonalWindow::rectangle(0, 0, 1, 1);
  for (int i = 0; i < 90; ++i) {
    r.pattern.points.push_back({rng.uniform(), rng.uniform()});
    r.pattern.marks.push_back(0);  // mark B stays empty
  }
  cohort.patients.push_back(std::move(r));
  auto model = fit_cohort(cohort, InteractionSpec::none(2), plain_options());
  ModelEvaluator eval(model, 0);
  const TileGrid& grid = *model.context->quadratures[0].grid;
  const double lambda_b = std::exp(model.coefficients[1]);
  const double raw_b = residual_total(eval, 1, ResidualKind::Raw, grid);
  CHECK(raw_b == doctest::Approx(-lambda_b * 1.0).epsilon(1e-6));
}

TEST_CASE("pearson and inverse residuals reject zero intensity at data") {
  Rng rng(64);
  auto cohort = csr_cohort(rng, 60, 5.0, "deg");
  auto model = fit_cohort(cohort, InteractionSpec::none(1), plain_options());
  // force a degenerate evaluation by injecting an exclusion the fit never saw
  model.spec = InteractionSpec::hardcore_model(PairMatrix(1, 0.5));
  ModelEvaluator eval(model, 0);
  const TileGrid& grid = *model.context->quadratures[0].grid;
  CHECK_THROWS_WITH_AS(residual_total(eval, 0, ResidualKind::Pearson, grid),
                       doctest::Contains("degenerate"), Error);
  CHECK_THROWS_AS(residual_total(eval, 0, ResidualKind::Inverse, grid), Error);
}

TEST_CASE("RMSE of totals") {
  CHECK(rmse_of_totals(std::vector<double>{3.0}) == doctest::Approx(3.0));
  CHECK(rmse_of_totals(std::vector<double>{3.0, -3.0}) == doctest::Approx(3.0));
  CHECK(rmse_of_totals(std::vector<double>{0.0, 0.0}) == doctest::Approx(0.0));
}

TEST_CASE("model menu covers the eight comparison models") {
  const auto& menu = model_menu();
  REQUIRE(menu.size() == 8);
  CHECK(menu_entry("fiksel2").use_offset == false);
  CHECK(menu_entry("fiksel2").use_covariates == false);
  CHECK(menu_entry("fiksel3").use_offset == false);
  CHECK(menu_entry("fiksel3").use_covariates == true);
  CHECK(menu_entry("fiksel4").kind == InteractionKind::FikselWithinOnly);
  CHECK(menu_entry("poisson").kind == InteractionKind::None);
  CHECK_THROWS_AS(menu_entry("fiksel9"), Error);

  PairMatrix h(2, 0.5), R(2, 5.0), g(2, 0.1);
  for (const auto& entry : menu) {
    auto spec = menu_spec(entry, h, R, g);
    CHECK(spec.n_marks == 2);
  }
  CHECK(menu_spec(menu_entry("hardcore"), h, R, g).irange(0, 0) ==
        doctest::Approx(0.5));
}
