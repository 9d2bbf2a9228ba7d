#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "common.hpp"

namespace mtg {

// Coordinates are micrometres throughout.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}
double distance(Point2 a, Point2 b);

using Ring = std::vector<Point2>;

struct WindowRep;  // Boost.Geometry backing, private to geometry.cpp

// A polygonal observation region: one or more outer rings (counterclockwise)
// with optional hole rings (clockwise). Immutable after construction; boundary
// points count as inside (1e-9 tolerance in window units).
class PolygonalWindow {
 public:
  PolygonalWindow() = default;

  // Rings are classified by orientation: counterclockwise rings become outer
  // boundaries, clockwise rings become holes of the outer ring containing them.
  static PolygonalWindow from_rings(const std::vector<Ring>& rings);
  static PolygonalWindow rectangle(double x0, double y0, double x1, double y1);

  bool empty() const { return rings_.empty(); }
  double area() const { return area_; }
  // Outer rings counterclockwise, each directly followed by its holes (clockwise).
  const std::vector<Ring>& rings() const { return rings_; }
  std::array<double, 4> bbox() const { return bbox_; }  // x0, y0, x1, y1
  // Largest distance between boundary vertices.
  double diameter() const;
  bool contains(Point2 p) const;
  bool is_rectangle() const { return is_rectangle_; }

  const WindowRep& rep() const;

 private:
  friend PolygonalWindow make_window_from_rep(std::shared_ptr<const WindowRep> rep);

  std::vector<Ring> rings_;
  double area_ = 0.0;
  std::array<double, 4> bbox_{0.0, 0.0, 0.0, 0.0};
  bool is_rectangle_ = false;
  std::shared_ptr<const WindowRep> rep_;
};

// Minimal convex polygon containing the input points.
// Fails with a degenerate-geometry error on < 3 non-collinear points.
PolygonalWindow convex_hull(std::span<const Point2> points);

// Hull dilation factor 1 / sqrt(1 - n_hull_vertices / n_points).
double ripley_rasson_factor(std::size_t n_points, std::size_t n_hull_vertices);

// Convex hull scaled about its centroid by the Ripley-Rasson factor.
PolygonalWindow ripley_rasson_window(std::span<const Point2> points);

PolygonalWindow scale_about_centroid(const PolygonalWindow& w, double factor);

// Set intersection of all windows; empty result is an error.
PolygonalWindow intersect_windows(std::span<const PolygonalWindow> windows);

// Points of w at distance >= margin from the boundary. Non-convex windows may
// disconnect; all components are kept. Emptying the window is an error.
PolygonalWindow erode_border(const PolygonalWindow& w, double margin);

// Axis-aligned tiling of the window's bounding box; each tile carries its
// clipped overlap area with the window and an interior representative point.
class TileGrid {
 public:
  TileGrid() = default;
  TileGrid(const PolygonalWindow& window, int nx, int ny);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t n_cells() const { return areas_.size(); }
  const PolygonalWindow& window() const { return window_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }

  double tile_area(std::size_t idx) const { return areas_[idx]; }
  const std::vector<double>& tile_areas() const { return areas_; }
  Point2 cell_center(std::size_t idx) const;
  // Interior point of the clipped cell; only meaningful when tile_area > 0.
  Point2 representative(std::size_t idx) const { return reps_[idx]; }
  std::optional<std::size_t> cell_index(Point2 p) const;
  double total_area() const { return total_area_; }

  bool same_geometry(const TileGrid& other) const;

 private:
  PolygonalWindow window_;
  int nx_ = 0, ny_ = 0;
  double x0_ = 0, y0_ = 0, dx_ = 0, dy_ = 0;
  std::vector<double> areas_;
  std::vector<Point2> reps_;
  double total_area_ = 0.0;
};

// Area of overlap between w and w translated by (dx, dy).
double translation_overlap_area(const PolygonalWindow& w, double dx, double dy);

}  // namespace mtg
