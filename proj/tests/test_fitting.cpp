#include <doctest.h>

#include <cmath>

#include "core/fitting.hpp"
#include "test_util.hpp"

using namespace mtg;
using namespace mtg::test;

namespace {

MarkedPointPattern poisson_pattern(Rng& rng, double rate, const PolygonalWindow& w,
                                   int mark = 0, const std::string& id = "sim") {
  MarkedPointPattern p;
  p.id = id;
  p.window = w;
  const auto box = w.bbox();
  const long n = rng.poisson(rate * w.area());
  for (long i = 0; i < n; ++i) {
    Point2 pt;
    do {
      pt = {rng.uniform(box[0], box[2]), rng.uniform(box[1], box[3])};
    } while (!w.contains(pt));
    p.points.push_back(pt);
    p.marks.push_back(mark);
  }
  return p;
}

Cohort single_pattern_cohort(MarkedPointPattern p, int n_marks = 1) {
  Cohort cohort;
  std::vector<std::string> labels;
  for (int m = 0; m < n_marks; ++m) labels.push_back("M" + std::to_string(m));
  cohort.marks = MarkSet(labels);
  PatientRecord r;
  r.pattern = std::move(p);
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

TEST_CASE("Berman-Turner counting weights") {
  auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);

  SUBCASE("empty pattern, 2x2 tiles, one mark") {
    MarkedPointPattern p;
    p.id = "e";
    p.window = sq;
    auto quad = make_quadrature(p, sq, 2, 2, 1);
    REQUIRE(quad.points.size() == 4);
    for (const auto& qp : quad.points) {
      CHECK(qp.w == doctest::Approx(0.25));
      CHECK_FALSE(qp.is_data);
    }
  }
  SUBCASE("a data point shares its tile weight with the dummy") {
    MarkedPointPattern p;
    p.id = "one";
    p.window = sq;
    p.points = {{0.1, 0.1}};
    p.marks = {0};
    auto quad = make_quadrature(p, sq, 2, 2, 1);
    REQUIRE(quad.points.size() == 5);
    int shared = 0;
    for (const auto& qp : quad.points)
      if (qp.w == doctest::Approx(0.125)) ++shared;
    CHECK(shared == 2);  // the dummy and the data point of the occupied tile
  }
  SUBCASE("weights sum to the domain area per mark") {
    Rng rng(4);
    auto w = random_convex_window(rng);
    MarkedPointPattern p;
    p.id = "r";
    p.window = w;
    const auto box = w.bbox();
    for (int i = 0; i < 300; ++i) {
      Point2 pt{rng.uniform(box[0], box[2]), rng.uniform(box[1], box[3])};
      if (!w.contains(pt)) continue;
      p.points.push_back(pt);
      p.marks.push_back(static_cast<int>(rng.index(3)));
    }
    auto quad = make_quadrature(p, w, 17, 23, 3);
    for (int m = 0; m < 3; ++m)
      CHECK(quad.weight_sum_by_mark[m] == doctest::Approx(w.area()).epsilon(1e-6));
    for (const auto& qp : quad.points) CHECK(qp.w > 0.0);
  }
}

TEST_CASE("design row construction") {
  auto sq = PolygonalWindow::rectangle(0, 0, 10, 10);
  MarkedPointPattern p;
  p.id = "rows";
  p.window = sq;
  p.points = {{2, 2}, {2.5, 2}, {7, 7}};
  p.marks = {0, 1, 0};
  MarkSet marks({"A", "B"});
  auto quad = make_quadrature(p, sq, 4, 4, 2);

  SUBCASE("no interaction, no covariates: intercept-only rows") {
    auto spec = InteractionSpec::none(2);
    auto layout = make_layout(marks, spec, {}, false);
    CHECK(layout.columns() == 2);
    auto block = build_rows(quad, nullptr, std::nullopt, spec, p, layout);
    CHECK(block.x.rows() == static_cast<long>(quad.points.size()));
    for (long i = 0; i < block.x.rows(); ++i)
      CHECK(block.x.row(i).sum() == doctest::Approx(1.0));  // one-hot intercepts
    CHECK(block.offset.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("stage IB encodes as the first stage dummy") {
    ClinicalCovariates c;
    c.age_years = 60;
    c.stage = Stage::IB;
    auto spec = InteractionSpec::none(2);
    auto layout = make_layout(marks, spec, {}, true);
    auto block = build_rows(quad, nullptr, c, spec, p, layout);
    // columns: 2 intercepts + 13 covariates
    REQUIRE(layout.columns() == 15);
    const int stage_ib = layout.covariate_col(2);
    const int stage_iv = layout.covariate_col(7);
    for (long i = 0; i < block.x.rows(); ++i) {
      CHECK(block.x(i, stage_ib) == 1.0);
      CHECK(block.x(i, stage_iv) == 0.0);
    }
  }
  SUBCASE("statistic columns match the direct oracle") {
    auto spec = InteractionSpec::fiksel(PairMatrix(2, 0.1), PairMatrix(2, 3.0),
                                        PairMatrix(2, 0.2));
    auto layout = make_layout(marks, spec, {}, false);
    auto block = build_rows(quad, nullptr, std::nullopt, spec, p, layout);
    long row = 0;
    for (const auto& qp : quad.points) {
      auto stats = sufficient_statistics(qp.u, qp.mark, p, spec,
                                         qp.is_data ? qp.data_index : -1);
      if (stats.hardcore_violated) continue;
      for (int k = 0; k < layout.n_strengths; ++k)
        CHECK(block.x(row, layout.strength_col(k)) ==
              doctest::Approx(stats.values[k]));
      ++row;
    }
    CHECK(row == block.x.rows());
  }
  SUBCASE("a data point violating the hardcore is an error") {
    auto spec = InteractionSpec::fiksel(PairMatrix(2, 1.0), PairMatrix(2, 3.0),
                                        PairMatrix(2, 0.2));
    // points 0 and 1 are 0.5 apart, below h = 1
    auto layout = make_layout(marks, spec, {}, false);
    CHECK_THROWS_WITH_AS(build_rows(quad, nullptr, std::nullopt, spec, p, layout),
                         doctest::Contains("inconsistent hardcore"), Error);
  }
}

TEST_CASE("IRLS weighted Poisson fit") {
  SUBCASE("intercept-only CSR fit recovers log intensity") {
    Rng rng(100);
    auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);
    MarkedPointPattern p;
    p.id = "csr";
    p.window = sq;
    for (int i = 0; i < 50; ++i) {
      p.points.push_back({rng.uniform(), rng.uniform()});
      p.marks.push_back(0);
    }
    auto cohort = single_pattern_cohort(p);
    auto model = fit_cohort(cohort, InteractionSpec::none(1), plain_options());
    CHECK(model.coefficients[0] == doctest::Approx(std::log(50.0)).epsilon(0.02));
  }
  SUBCASE("duplicated columns raise a singular-design error") {
    DesignBlock b;
    b.x = Eigen::MatrixXd::Ones(20, 2);  // two identical columns
    b.response = Eigen::VectorXd::Zero(20);
    b.response[0] = 10.0;
    b.weight = Eigen::VectorXd::Constant(20, 0.1);
    b.offset = Eigen::VectorXd::Zero(20);
    std::vector<DesignBlock> blocks;
    blocks.push_back(std::move(b));
    CHECK_THROWS_WITH_AS(irls_fit(blocks, {"a", "b"}),
                         doctest::Contains("aliased"), Error);
  }
  SUBCASE("objective equivalence on random designs") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
      const long n = 200 + static_cast<long>(rng.index(200));
      const int p = 3;
      DesignBlock b;
      b.x = Eigen::MatrixXd::Zero(n, p);
      b.response = Eigen::VectorXd::Zero(n);
      b.weight = Eigen::VectorXd::Zero(n);
      b.offset = Eigen::VectorXd::Zero(n);
      for (long i = 0; i < n; ++i) {
        b.x(i, 0) = 1.0;
        b.x(i, 1) = rng.normal();
        b.x(i, 2) = rng.uniform();
        const double w = 0.05 + rng.uniform();
        b.weight[i] = w;
        b.response[i] = rng.uniform() < 0.2 ? 1.0 / w : 0.0;
        b.offset[i] = 0.3 * rng.normal();
      }
      std::vector<DesignBlock> blocks;
      blocks.push_back(std::move(b));
      auto fit = irls_fit(blocks, {"c0", "c1", "c2"});
      const double direct = quadrature_log_pl(blocks, fit.coefficients);
      CHECK(std::abs(direct - fit.log_pl) <=
            1e-6 * (std::abs(direct) + std::abs(fit.log_pl)));
    }
  }
}

TEST_CASE("cohort fitting") {
  auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);

  SUBCASE("two identical patients halve the variance") {
    Rng rng(42);
    auto base = poisson_pattern(rng, 120, sq, 0, "a");
    Cohort one = single_pattern_cohort(base);
    Cohort two = one;
    PatientRecord r;
    r.pattern = base;
    r.pattern.id = "b";
    two.patients.push_back(r);

    auto m1 = fit_cohort(one, InteractionSpec::none(1), plain_options());
    auto m2 = fit_cohort(two, InteractionSpec::none(1), plain_options());
    CHECK(m1.coefficients[0] == doctest::Approx(m2.coefficients[0]).epsilon(1e-8));
    CHECK(m2.table[0].std_error ==
          doctest::Approx(m1.table[0].std_error / std::sqrt(2.0)).epsilon(1e-6));
  }
  SUBCASE("known covariate effect is recovered within 3 SE") {
    Rng rng(11);
    Cohort cohort;
    cohort.marks = MarkSet({"A"});
    const double beta = 0.7, base_rate = 150.0;
    for (int k = 0; k < 20; ++k) {
      PatientRecord r;
      const int male = k % 2;
      r.pattern = poisson_pattern(rng, base_rate * std::exp(beta * male), sq, 0,
                                  "p" + std::to_string(k));
      ClinicalCovariates c;
      c.gender_male = male;
      c.age_years = 60;
      r.covariates = c;
      cohort.patients.push_back(std::move(r));
    }
    FitOptions opts = plain_options();
    opts.use_covariates = true;
    opts.covariate_subset = {"gender_male"};
    auto model = fit_cohort(cohort, InteractionSpec::none(1), opts);
    const auto* entry = model.find("gender_male");
    REQUIRE(entry != nullptr);
    CHECK(std::abs(entry->estimate - beta) < 3.0 * entry->std_error);
  }
  SUBCASE("pooled log-PL is the sum of per-patient contributions") {
    Rng rng(3);
    Cohort cohort;
    cohort.marks = MarkSet({"A"});
    for (int k = 0; k < 3; ++k) {
      PatientRecord r;
      r.pattern = poisson_pattern(rng, 80, sq, 0, "p" + std::to_string(k));
      cohort.patients.push_back(std::move(r));
    }
    auto spec = InteractionSpec::none(1);
    auto model = fit_cohort(cohort, spec, plain_options());
    double total = 0.0;
    for (std::size_t k = 0; k < cohort.size(); ++k) {
      auto block = build_rows(model.context->quadratures[k], nullptr,
                              std::nullopt, spec, model.context->patterns[k],
                              model.layout);
      std::vector<DesignBlock> single;
      single.push_back(std::move(block));
      total += quadrature_log_pl(single, model.coefficients);
    }
    CHECK(total == doctest::Approx(model.log_pl).epsilon(1e-9));
  }
  SUBCASE("refining the dummy grid leaves coefficients within the coarse SE") {
    Rng rng(8);
    auto cohort = single_pattern_cohort(poisson_pattern(rng, 200, sq));
    FitOptions coarse = plain_options();
    coarse.dummy_grid = 32;
    FitOptions fine = coarse;
    fine.dummy_grid = 64;
    auto mc = fit_cohort(cohort, InteractionSpec::none(1), coarse);
    auto mf = fit_cohort(cohort, InteractionSpec::none(1), fine);
    CHECK(std::abs(mc.coefficients[0] - mf.coefficients[0]) <
          mc.table[0].std_error);
  }
}

TEST_CASE("conditional intensity evaluation") {
  Rng rng(15);
  auto sq = PolygonalWindow::rectangle(0, 0, 10, 10);
  MarkedPointPattern p;
  p.id = "ci";
  p.window = sq;
  for (int i = 0; i < 150; ++i) {
    p.points.push_back({rng.uniform(0, 10), rng.uniform(0, 10)});
    p.marks.push_back(static_cast<int>(rng.index(2)));
  }
  Cohort cohort = single_pattern_cohort(p, 2);

  SUBCASE("intercept-only model is constant") {
    auto model = fit_cohort(cohort, InteractionSpec::none(2), plain_options());
    ModelEvaluator eval(model, 0);
    const double expected = std::exp(model.coefficients[0]);
    CHECK(eval.conditional_intensity({5, 5}, 0) == doctest::Approx(expected));
    CHECK(eval.conditional_intensity({1, 9}, 0) == doctest::Approx(expected));
  }
  // data-consistent hardcore distance, as the estimator would provide
  PairMatrix h_data(2, 1.0);
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j) {
      auto d = min_cross_nn_distance(p, i, j);
      REQUIRE(d.has_value());
      h_data.set(i, j, std::min(h_data(i, j), 0.9 * *d));
    }
  const double h_min = std::min({h_data(0, 0), h_data(0, 1), h_data(1, 1)});

  SUBCASE("hardcore zeroes the intensity near data points") {
    auto spec = InteractionSpec::fiksel(h_data, PairMatrix(2, 2.0),
                                        PairMatrix(2, 0.1));
    FitOptions opts = plain_options();
    opts.border = 0.0;  // keep every data point in the quadrature
    auto model = fit_cohort(cohort, spec, opts);
    ModelEvaluator eval(model, 0);
    const Point2 near{p.points[0].x + 0.2 * h_min, p.points[0].y};
    CHECK(eval.conditional_intensity(near, 0) == 0.0);
  }
  SUBCASE("matches the direct log-linear formula at random locations") {
    auto spec = InteractionSpec::fiksel(h_data, PairMatrix(2, 2.0),
                                        PairMatrix(2, 0.15));
    FitOptions opts = plain_options();
    opts.border = 0.0;
    auto model = fit_cohort(cohort, spec, opts);
    ModelEvaluator eval(model, 0);
    for (int t = 0; t < 200; ++t) {
      const Point2 u{rng.uniform(0, 10), rng.uniform(0, 10)};
      const int mark = static_cast<int>(rng.index(2));
      auto stats = sufficient_statistics(u, mark, model.context->patterns[0],
                                         spec);
      double expected;
      if (stats.hardcore_violated) {
        expected = 0.0;
      } else {
        double eta = model.coefficients[model.layout.intercept_col(mark)];
        for (int k = 0; k < model.layout.n_strengths; ++k)
          eta += model.coefficients[model.layout.strength_col(k)] * stats.values[k];
        expected = std::exp(eta);
      }
      CHECK(eval.conditional_intensity(u, mark) == doctest::Approx(expected));
    }
  }
}

TEST_CASE("profile pseudolikelihood") {
  Rng rng(19);
  auto sq = PolygonalWindow::rectangle(0, 0, 20, 20);
  Cohort cohort;
  cohort.marks = MarkSet({"A"});
  for (int k = 0; k < 2; ++k) {
    PatientRecord r;
    r.pattern = poisson_pattern(rng, 1.0, sq, 0, "p" + std::to_string(k));
    cohort.patients.push_back(std::move(r));
  }
  FitOptions opts = plain_options();
  opts.dummy_grid = 24;
  double h_fit = 1.0;
  for (const auto& patient : cohort.patients) {
    auto d = min_cross_nn_distance(patient.pattern, 0, 0);
    REQUIRE(d.has_value());
    h_fit = std::min(h_fit, 0.9 * *d);
  }

  SUBCASE("single grid point passes through") {
    const std::vector<double> rg{3.0}, gg{0.1};
    auto result = profile_pl(cohort, InteractionKind::Fiksel, PairMatrix(1, h_fit),
                             rg, gg, opts);
    CHECK(result.range(0, 0) == 3.0);
    CHECK(result.rate(0, 0) == 0.1);
    CHECK(std::isfinite(result.best_log_pl));
  }
  SUBCASE("selected point maximizes the evaluated grid") {
    const std::vector<double> rg{2.0, 3.0, 4.0}, gg{-0.1, 0.1};
    auto result = profile_pl(cohort, InteractionKind::Fiksel, PairMatrix(1, h_fit),
                             rg, gg, opts);
    for (const auto& entry : result.trace)
      CHECK(result.best_log_pl >= entry.log_pl);
    // re-evaluation at the optimum reproduces the trace value
    auto spec = InteractionSpec::fiksel(PairMatrix(1, h_fit), result.range,
                                        result.rate);
    FitOptions refit = opts;
    refit.border = 4.0;  // the profiling border (max of the range grid)
    auto model = fit_cohort(cohort, spec, refit);
    CHECK(model.log_pl == doctest::Approx(result.best_log_pl).epsilon(1e-9));
  }
  SUBCASE("infeasible grid points are scored -inf and skipped") {
    const std::vector<double> rg{h_fit / 2, 3.0}, gg{0.1};  // first range < hardcore
    auto result = profile_pl(cohort, InteractionKind::Fiksel, PairMatrix(1, h_fit),
                             rg, gg, opts);
    CHECK(result.range(0, 0) == 3.0);
    bool saw_inf = false;
    for (const auto& entry : result.trace)
      if (entry.log_pl == kNegInf) saw_inf = true;
    CHECK(saw_inf);
  }
}
