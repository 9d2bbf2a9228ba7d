#include <doctest.h>

#include <cmath>

#include "core/geometry.hpp"
#include "test_util.hpp"

using namespace mtg;
using namespace mtg::test;

namespace {
const std::vector<Point2> kSquareCorners{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
}

TEST_CASE("convex hull of square corners is the square") {
  auto hull = convex_hull(kSquareCorners);
  CHECK(hull.area() == doctest::Approx(1.0));
  CHECK(hull.rings().size() == 1);
  CHECK(hull.rings()[0].size() == 4);
}

TEST_CASE("interior points do not change the hull") {
  auto pts = kSquareCorners;
  pts.push_back({0.5, 0.5});
  auto hull = convex_hull(pts);
  CHECK(hull.area() == doctest::Approx(1.0));
  CHECK(hull.rings()[0].size() == 4);
}

TEST_CASE("hull of uniform points stays inside the unit square and contains them") {
  Rng rng(42);
  auto pts = random_points_in_box(rng, 100, 0, 0, 1, 1);
  auto hull = convex_hull(pts);
  CHECK(hull.area() <= 1.0);
  for (const auto& p : pts) {
    CHECK(hull.contains(p));
    CHECK(point_in_rings_naive(hull.rings(), p));
  }
}

TEST_CASE("degenerate hulls are rejected") {
  CHECK_THROWS_AS(convex_hull(std::vector<Point2>{{0, 0}, {1, 1}}), Error);
  CHECK_THROWS_AS(convex_hull(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}),
                  Error);
}

TEST_CASE("Ripley-Rasson dilation factor") {
  CHECK(ripley_rasson_factor(100, 19) == doctest::Approx(1.0 / std::sqrt(0.81)));
  CHECK(ripley_rasson_factor(1000000, 3) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_THROWS_AS(ripley_rasson_factor(19, 19), Error);
}

TEST_CASE("Ripley-Rasson window contains every input point") {
  Rng rng(7);
  auto pts = random_points_in_box(rng, 60, 2, 3, 8, 9);
  auto w = ripley_rasson_window(pts);
  auto hull = convex_hull(pts);
  CHECK(w.area() > hull.area());
  for (const auto& p : pts) CHECK(w.contains(p));
}

TEST_CASE("Ripley-Rasson factor is invariant under rigid motion and scaling") {
  Rng rng(11);
  auto pts = random_points_in_box(rng, 80, 0, 0, 1, 1);
  auto w0 = ripley_rasson_window(pts);
  const double c = std::cos(0.7), s = std::sin(0.7);
  std::vector<Point2> moved(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    moved[i] = {3.0 * (c * pts[i].x - s * pts[i].y) + 10.0,
                3.0 * (s * pts[i].x + c * pts[i].y) - 4.0};
  auto w1 = ripley_rasson_window(moved);
  // areas scale by 9 under a uniform scaling of 3
  CHECK(w1.area() == doctest::Approx(9.0 * w0.area()).epsilon(1e-9));
}

TEST_CASE("window intersection") {
  auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);
  auto shifted = PolygonalWindow::rectangle(0.5, 0, 1.5, 1);

  SUBCASE("idempotence") {
    std::vector<PolygonalWindow> ws{sq, sq};
    auto w = intersect_windows(ws);
    CHECK(w.area() == doctest::Approx(1.0));
  }
  SUBCASE("rectangle overlap") {
    std::vector<PolygonalWindow> ws{sq, shifted};
    auto w = intersect_windows(ws);
    CHECK(w.area() == doctest::Approx(0.5));
    auto b = w.bbox();
    CHECK(b[0] == doctest::Approx(0.5));
    CHECK(b[2] == doctest::Approx(1.0));
  }
  SUBCASE("disjoint windows fail") {
    auto far_sq = PolygonalWindow::rectangle(5, 5, 6, 6);
    std::vector<PolygonalWindow> ws{sq, far_sq};
    CHECK_THROWS_AS(intersect_windows(ws), Error);
  }
  SUBCASE("area bounded by the minimum input area") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      auto a = random_convex_window(rng);
      auto shifted_b = scale_about_centroid(a, 0.6 + 0.8 * rng.uniform());
      std::vector<PolygonalWindow> ws{a, shifted_b};
      auto w = intersect_windows(ws);
      CHECK(w.area() <= std::min(a.area(), shifted_b.area()) * (1 + 1e-12));
    }
  }
}

TEST_CASE("border erosion") {
  auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);

  SUBCASE("zero margin is a no-op") {
    auto w = erode_border(sq, 0.0);
    CHECK(w.area() == doctest::Approx(1.0));
  }
  SUBCASE("square shrinks to the analytic offset") {
    auto w = erode_border(sq, 0.1);
    CHECK(w.area() == doctest::Approx(0.64).epsilon(1e-6));
    auto b = w.bbox();
    CHECK(b[0] == doctest::Approx(0.1));
    CHECK(b[3] == doctest::Approx(0.9));
  }
  SUBCASE("over-erosion fails") {
    CHECK_THROWS_AS(erode_border(sq, 0.6), Error);
  }
  SUBCASE("area strictly decreases in the margin") {
    Rng rng(5);
    auto w = random_convex_window(rng);
    double last = w.area();
    for (double margin : {0.05, 0.1, 0.2, 0.4}) {
      auto e = erode_border(w, margin * std::sqrt(w.area()));
      CHECK(e.area() < last);
      last = e.area();
    }
  }
}

TEST_CASE("tile grid partitions simple windows") {
  auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);

  SUBCASE("2x2 over the unit square") {
    TileGrid grid(sq, 2, 2);
    REQUIRE(grid.n_cells() == 4);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(grid.tile_area(i) == doctest::Approx(0.25));
    CHECK(grid.total_area() == doctest::Approx(1.0));
  }
  SUBCASE("1x1 over the unit square") {
    TileGrid grid(sq, 1, 1);
    REQUIRE(grid.n_cells() == 1);
    CHECK(grid.tile_area(0) == doctest::Approx(1.0));
  }
  SUBCASE("L-shaped window") {
    auto ell = PolygonalWindow::from_rings(
        {Ring{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}});
    CHECK(ell.area() == doctest::Approx(3.0));
    TileGrid grid(ell, 2, 2);
    CHECK(grid.total_area() == doctest::Approx(3.0).epsilon(1e-9));
    Rng rng(17);
    const double mc = mc_area_naive(ell, rng, 1000000);
    CHECK(grid.total_area() == doctest::Approx(mc).epsilon(0.005));
  }
}

TEST_CASE("tile areas sum to the window area on random polygons") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    PolygonalWindow w =
        trial % 2 == 0 ? random_convex_window(rng) : random_star_window(rng);
    TileGrid grid(w, 7 + static_cast<int>(rng.index(20)),
                  7 + static_cast<int>(rng.index(20)));
    CHECK(grid.total_area() ==
          doctest::Approx(w.area()).epsilon(1e-6));
  }
}

TEST_CASE("cell index lookup maps points to their tile") {
  auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);
  TileGrid grid(sq, 4, 4);
  auto idx = grid.cell_index({0.1, 0.1});
  REQUIRE(idx.has_value());
  CHECK(*idx == 0);
  idx = grid.cell_index({0.99, 0.99});
  REQUIRE(idx.has_value());
  CHECK(*idx == 15);
  // right/top boundary points clamp into the last cell
  idx = grid.cell_index({1.0, 1.0});
  REQUIRE(idx.has_value());
  CHECK(*idx == 15);
  CHECK_FALSE(grid.cell_index({1.5, 0.5}).has_value());
}

TEST_CASE("translation overlap area") {
  auto sq = PolygonalWindow::rectangle(0, 0, 1, 1);
  CHECK(translation_overlap_area(sq, 0.25, 0.0) == doctest::Approx(0.75));
  CHECK(translation_overlap_area(sq, 0.25, 0.5) == doctest::Approx(0.375));
  CHECK(translation_overlap_area(sq, 2.0, 0.0) == doctest::Approx(0.0));

  // general polygon path agrees with the rectangle fast path
  auto rect_as_poly = PolygonalWindow::from_rings(
      {Ring{{0, 0}, {0.5, 0}, {1, 0}, {1, 1}, {0, 1}}});  // extra collinear vertex
  CHECK(translation_overlap_area(rect_as_poly, 0.25, 0.5) ==
        doctest::Approx(0.375).epsilon(1e-6));
}

TEST_CASE("multi-ring windows with holes") {
  // 4x4 square with a central 1x1 hole (clockwise ring)
  Ring outer{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  Ring hole{{1.5, 1.5}, {1.5, 2.5}, {2.5, 2.5}, {2.5, 1.5}};
  auto w = PolygonalWindow::from_rings({outer, hole});
  CHECK(w.area() == doctest::Approx(15.0));
  CHECK(w.contains({0.5, 0.5}));
  CHECK_FALSE(w.contains({2.0, 2.0}));

  TileGrid grid(w, 8, 8);
  CHECK(grid.total_area() == doctest::Approx(15.0).epsilon(1e-9));
}
