#include "geometry.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/adapted/boost_tuple.hpp>
#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/multi_point.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/register/point.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

BOOST_GEOMETRY_REGISTER_POINT_2D(mtg::Point2, double, boost::geometry::cs::cartesian, x, y)

namespace mtg {

namespace bg = boost::geometry;

using BgPolygon = bg::model::polygon<Point2, /*ClockWise=*/false, /*Closed=*/true>;
using BgMultiPolygon = bg::model::multi_polygon<BgPolygon>;
using BgBox = bg::model::box<Point2>;
using BgMultiPoint = bg::model::multi_point<Point2>;

struct WindowRep {
  BgMultiPolygon shape;
};

namespace {

constexpr double kBoundaryTol = 1e-9;       // point-on-boundary tolerance, window units
constexpr double kSliverFraction = 1e-9;    // rings below this area fraction are dropped

double ring_signed_area(const Ring& ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = ring[i];
    const Point2& b = ring[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

// Removes consecutive duplicates and collinear vertices from an open ring.
Ring simplify_ring(const Ring& ring, double scale) {
  const double dup_tol2 = scale * scale * 1e-24;
  const double cross_tol = scale * scale * 1e-13;
  Ring tmp;
  tmp.reserve(ring.size());
  for (const Point2& p : ring) {
    if (!tmp.empty() && squared_distance(tmp.back(), p) <= dup_tol2) continue;
    tmp.push_back(p);
  }
  while (tmp.size() >= 2 && squared_distance(tmp.front(), tmp.back()) <= dup_tol2)
    tmp.pop_back();
  if (tmp.size() < 3) return {};

  Ring out;
  out.reserve(tmp.size());
  const std::size_t n = tmp.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& prev = out.empty() ? tmp[(i + n - 1) % n] : out.back();
    const Point2& cur = tmp[i];
    const Point2& next = tmp[(i + 1) % n];
    const double cross = (cur.x - prev.x) * (next.y - prev.y) -
                         (cur.y - prev.y) * (next.x - prev.x);
    if (std::abs(cross) <= cross_tol) continue;
    out.push_back(cur);
  }
  if (out.size() < 3) return {};
  return out;
}

Ring open_ring(const BgPolygon::ring_type& closed) {
  Ring out(closed.begin(), closed.end());
  if (out.size() >= 2 && squared_distance(out.front(), out.back()) == 0.0)
    out.pop_back();
  return out;
}

BgPolygon::ring_type closed_ring(const Ring& open) {
  BgPolygon::ring_type out(open.begin(), open.end());
  if (!out.empty()) out.push_back(out.front());
  return out;
}

double shape_scale(const BgMultiPolygon& mp) {
  if (mp.empty()) return 1.0;
  BgBox box;
  bg::envelope(mp, box);
  const double w = box.max_corner().x - box.min_corner().x;
  const double h = box.max_corner().y - box.min_corner().y;
  const double s = std::hypot(w, h);
  return s > 0 ? s : 1.0;
}

// Drops sliver rings/polygons and merges collinear vertices.
BgMultiPolygon cleanup(const BgMultiPolygon& raw) {
  const double total = std::abs(bg::area(raw));
  const double scale = shape_scale(raw);
  const double min_area = total * kSliverFraction;
  BgMultiPolygon out;
  for (const BgPolygon& poly : raw) {
    Ring outer = simplify_ring(open_ring(poly.outer()), scale);
    if (outer.empty()) continue;
    if (std::abs(ring_signed_area(outer)) <= min_area) continue;
    BgPolygon cleaned;
    cleaned.outer() = closed_ring(outer);
    for (const auto& hole : poly.inners()) {
      Ring h = simplify_ring(open_ring(hole), scale);
      if (h.empty()) continue;
      if (std::abs(ring_signed_area(h)) <= min_area) continue;
      cleaned.inners().push_back(closed_ring(h));
    }
    bg::correct(cleaned);
    out.push_back(std::move(cleaned));
  }
  return out;
}

}  // namespace

double distance(Point2 a, Point2 b) { return std::sqrt(squared_distance(a, b)); }

PolygonalWindow make_window_from_rep(std::shared_ptr<const WindowRep> rep) {
  PolygonalWindow w;
  const BgMultiPolygon& mp = rep->shape;
  require(!mp.empty(), Status::Geometry, "window is empty");

  for (const BgPolygon& poly : mp) {
    w.rings_.push_back(open_ring(poly.outer()));
    for (const auto& hole : poly.inners()) w.rings_.push_back(open_ring(hole));
  }
  for (const Ring& ring : w.rings_)
    for (const Point2& p : ring)
      require(std::isfinite(p.x) && std::isfinite(p.y), Status::Geometry,
              "window vertex is not finite");

  w.area_ = bg::area(mp);
  require(w.area_ > 0.0, Status::Geometry, "window area must be positive");

  BgBox box;
  bg::envelope(mp, box);
  w.bbox_ = {box.min_corner().x, box.min_corner().y, box.max_corner().x,
             box.max_corner().y};

  if (mp.size() == 1 && mp[0].inners().empty() && w.rings_[0].size() == 4) {
    const double box_area =
        (w.bbox_[2] - w.bbox_[0]) * (w.bbox_[3] - w.bbox_[1]);
    w.is_rectangle_ = std::abs(box_area - w.area_) <= 1e-12 * box_area;
  }

  std::string reason;
  if (!bg::is_valid(mp, reason))
    fail(Status::Geometry, "invalid window geometry: " + reason);

  w.rep_ = std::move(rep);
  return w;
}

const WindowRep& PolygonalWindow::rep() const {
  require(rep_ != nullptr, Status::Invalid, "window is empty");
  return *rep_;
}

PolygonalWindow PolygonalWindow::from_rings(const std::vector<Ring>& rings) {
  require(!rings.empty(), Status::Geometry, "window needs at least one ring");
  auto rep = std::make_shared<WindowRep>();

  std::vector<Ring> outers, holes;
  for (const Ring& ring : rings) {
    require(ring.size() >= 3, Status::Geometry, "ring needs at least 3 vertices");
    const double a = ring_signed_area(ring);
    require(a != 0.0, Status::Geometry, "ring has zero area");
    (a > 0 ? outers : holes).push_back(ring);
  }
  require(!outers.empty(), Status::Geometry, "no counterclockwise outer ring");

  for (const Ring& outer : outers) {
    BgPolygon poly;
    poly.outer() = closed_ring(outer);
    rep->shape.push_back(std::move(poly));
  }
  for (const Ring& hole : holes) {
    bool placed = false;
    for (BgPolygon& poly : rep->shape) {
      BgPolygon outer_only;
      outer_only.outer() = poly.outer();
      if (bg::within(hole.front(), outer_only)) {
        poly.inners().push_back(closed_ring(hole));
        placed = true;
        break;
      }
    }
    require(placed, Status::Geometry, "hole ring lies outside every outer ring");
  }
  for (BgPolygon& poly : rep->shape) bg::correct(poly);
  return make_window_from_rep(std::move(rep));
}

PolygonalWindow PolygonalWindow::rectangle(double x0, double y0, double x1,
                                           double y1) {
  require(x1 > x0 && y1 > y0, Status::Geometry, "rectangle must have positive size");
  return from_rings({Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}});
}

double PolygonalWindow::diameter() const {
  double best = 0.0;
  std::vector<Point2> vertices;
  for (const Ring& ring : rings_)
    vertices.insert(vertices.end(), ring.begin(), ring.end());
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j)
      best = std::max(best, squared_distance(vertices[i], vertices[j]));
  return std::sqrt(best);
}

bool PolygonalWindow::contains(Point2 p) const {
  if (empty()) return false;
  if (is_rectangle_) {
    return p.x >= bbox_[0] - kBoundaryTol && p.x <= bbox_[2] + kBoundaryTol &&
           p.y >= bbox_[1] - kBoundaryTol && p.y <= bbox_[3] + kBoundaryTol;
  }
  if (p.x < bbox_[0] - kBoundaryTol || p.x > bbox_[2] + kBoundaryTol ||
      p.y < bbox_[1] - kBoundaryTol || p.y > bbox_[3] + kBoundaryTol)
    return false;
  if (bg::covered_by(p, rep_->shape)) return true;
  return bg::distance(p, rep_->shape) <= kBoundaryTol;
}

PolygonalWindow convex_hull(std::span<const Point2> points) {
  require(points.size() >= 3, Status::Degenerate,
          "convex hull needs at least 3 points");
  for (const Point2& p : points)
    require(std::isfinite(p.x) && std::isfinite(p.y), Status::Invalid,
            "point coordinates must be finite");
  BgMultiPoint mp(points.begin(), points.end());
  BgPolygon hull;
  bg::convex_hull(mp, hull);
  Ring ring = open_ring(hull.outer());
  if (ring.size() < 3 || std::abs(ring_signed_area(ring)) <= 0.0)
    fail(Status::Degenerate, "convex hull is degenerate (collinear points)");
  return PolygonalWindow::from_rings({ring});
}

double ripley_rasson_factor(std::size_t n_points, std::size_t n_hull_vertices) {
  require(n_points > n_hull_vertices, Status::Degenerate,
          "cannot dilate: hull vertex count must be below the point count");
  const double ratio =
      static_cast<double>(n_hull_vertices) / static_cast<double>(n_points);
  return 1.0 / std::sqrt(1.0 - ratio);
}

PolygonalWindow scale_about_centroid(const PolygonalWindow& w, double factor) {
  require(factor > 0.0, Status::Invalid, "scale factor must be positive");
  Point2 c;
  bg::centroid(w.rep().shape, c);
  std::vector<Ring> rings = w.rings();
  for (Ring& ring : rings)
    for (Point2& p : ring) {
      p.x = c.x + factor * (p.x - c.x);
      p.y = c.y + factor * (p.y - c.y);
    }
  return PolygonalWindow::from_rings(rings);
}

PolygonalWindow ripley_rasson_window(std::span<const Point2> points) {
  PolygonalWindow hull = convex_hull(points);
  const double factor =
      ripley_rasson_factor(points.size(), hull.rings().front().size());
  return scale_about_centroid(hull, factor);
}

PolygonalWindow intersect_windows(std::span<const PolygonalWindow> windows) {
  require(!windows.empty(), Status::Invalid,
          "intersection of an empty window list");
  BgMultiPolygon acc = windows.front().rep().shape;
  for (std::size_t i = 1; i < windows.size(); ++i) {
    BgMultiPolygon next;
    bg::intersection(acc, windows[i].rep().shape, next);
    acc = std::move(next);
    if (acc.empty() || bg::area(acc) <= 0.0)
      fail(Status::Geometry, "window intersection is empty");
  }
  acc = cleanup(acc);
  require(!acc.empty(), Status::Geometry, "window intersection is empty");
  auto rep = std::make_shared<WindowRep>();
  rep->shape = std::move(acc);
  return make_window_from_rep(std::move(rep));
}

PolygonalWindow erode_border(const PolygonalWindow& w, double margin) {
  require(margin >= 0.0, Status::Invalid, "erosion margin must be nonnegative");
  if (margin == 0.0) return w;

  bg::strategy::buffer::distance_symmetric<double> dist(-margin);
  bg::strategy::buffer::side_straight side;
  bg::strategy::buffer::join_round join(64);
  bg::strategy::buffer::end_round end(64);
  bg::strategy::buffer::point_circle circle(64);
  BgMultiPolygon eroded;
  bg::buffer(w.rep().shape, eroded, dist, side, join, end, circle);
  eroded = cleanup(eroded);
  if (eroded.empty() || bg::area(eroded) <= 0.0)
    fail(Status::Geometry, "erosion emptied the window (margin " +
                               std::to_string(margin) + ")");
  auto rep = std::make_shared<WindowRep>();
  rep->shape = std::move(eroded);
  return make_window_from_rep(std::move(rep));
}

TileGrid::TileGrid(const PolygonalWindow& window, int nx, int ny)
    : window_(window), nx_(nx), ny_(ny) {
  require(nx >= 1 && ny >= 1, Status::Invalid, "tile grid needs nx, ny >= 1");
  const auto box = window.bbox();
  x0_ = box[0];
  y0_ = box[1];
  dx_ = (box[2] - box[0]) / nx;
  dy_ = (box[3] - box[1]) / ny;
  areas_.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  reps_.assign(areas_.size(), Point2{});

  const BgMultiPolygon& shape = window.rep().shape;
  const double min_area = window.area() * 1e-12;

  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t idx = static_cast<std::size_t>(iy) * nx + ix;
      const double cx0 = x0_ + ix * dx_, cy0 = y0_ + iy * dy_;
      const double cx1 = ix + 1 == nx ? box[2] : cx0 + dx_;
      const double cy1 = iy + 1 == ny ? box[3] : cy0 + dy_;
      BgBox cell(Point2{cx0, cy0}, Point2{cx1, cy1});
      BgMultiPolygon clipped;
      bg::intersection(cell, shape, clipped);
      double a = bg::area(clipped);
      if (!(a > min_area)) continue;
      areas_[idx] = a;

      const Point2 center{0.5 * (cx0 + cx1), 0.5 * (cy0 + cy1)};
      if (bg::covered_by(center, shape)) {
        reps_[idx] = center;
        continue;
      }
      bool found = false;
      for (const BgPolygon& piece : clipped) {
        Point2 c;
        bg::centroid(piece, c);
        if (bg::covered_by(c, piece)) {
          reps_[idx] = c;
          found = true;
          break;
        }
      }
      for (int level = 4; !found && level <= 32; level *= 2) {
        for (int sy = 0; sy < level && !found; ++sy) {
          for (int sx = 0; sx < level && !found; ++sx) {
            Point2 cand{cx0 + (sx + 0.5) * (cx1 - cx0) / level,
                        cy0 + (sy + 0.5) * (cy1 - cy0) / level};
            if (bg::covered_by(cand, clipped)) {
              reps_[idx] = cand;
              found = true;
            }
          }
        }
      }
      require(found, Status::Internal,
              "no interior representative found for a nonempty tile");
    }
  }
  total_area_ = 0.0;
  for (double a : areas_) total_area_ += a;
}

Point2 TileGrid::cell_center(std::size_t idx) const {
  const std::size_t ix = idx % nx_, iy = idx / nx_;
  return {x0_ + (ix + 0.5) * dx_, y0_ + (iy + 0.5) * dy_};
}

std::optional<std::size_t> TileGrid::cell_index(Point2 p) const {
  if (nx_ == 0 || ny_ == 0 || dx_ <= 0 || dy_ <= 0) return std::nullopt;
  const double fx = (p.x - x0_) / dx_;
  const double fy = (p.y - y0_) / dy_;
  if (fx < 0 || fy < 0) return std::nullopt;
  int ix = static_cast<int>(fx);
  int iy = static_cast<int>(fy);
  if (ix == nx_ && p.x <= x0_ + nx_ * dx_ + kBoundaryTol) ix = nx_ - 1;
  if (iy == ny_ && p.y <= y0_ + ny_ * dy_ + kBoundaryTol) iy = ny_ - 1;
  if (ix < 0 || ix >= nx_ || iy < 0 || iy >= ny_) return std::nullopt;
  return static_cast<std::size_t>(iy) * nx_ + ix;
}

bool TileGrid::same_geometry(const TileGrid& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ &&
         std::abs(x0_ - other.x0_) <= 1e-12 && std::abs(y0_ - other.y0_) <= 1e-12 &&
         std::abs(dx_ - other.dx_) <= 1e-12 && std::abs(dy_ - other.dy_) <= 1e-12;
}

double translation_overlap_area(const PolygonalWindow& w, double dx, double dy) {
  if (w.is_rectangle()) {
    const auto b = w.bbox();
    const double ox = std::max(0.0, (b[2] - b[0]) - std::abs(dx));
    const double oy = std::max(0.0, (b[3] - b[1]) - std::abs(dy));
    return ox * oy;
  }
  BgMultiPolygon shifted = w.rep().shape;
  for (BgPolygon& poly : shifted) {
    for (Point2& p : poly.outer()) {
      p.x += dx;
      p.y += dy;
    }
    for (auto& hole : poly.inners())
      for (Point2& p : hole) {
        p.x += dx;
        p.y += dy;
      }
  }
  BgMultiPolygon overlap;
  bg::intersection(w.rep().shape, shifted, overlap);
  return bg::area(overlap);
}

}  // namespace mtg
