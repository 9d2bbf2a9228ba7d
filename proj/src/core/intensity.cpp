#include "intensity.hpp"

#include <algorithm>
#include <cmath>

namespace mtg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kKernelCutoff = 5.0;  // kernel support radius in bandwidths
constexpr double kEdgeMin = 1e-3;      // correction floor away from blowups

double gauss2(double squared_dist, double bandwidth) {
  const double s2 = bandwidth * bandwidth;
  return std::exp(-0.5 * squared_dist / s2) / (kTwoPi * s2);
}

struct CellRange {
  int ix0, ix1, iy0, iy1;
};

CellRange cells_in_disk(const TileGrid& grid, Point2 center, double radius) {
  const auto box = grid.window().bbox();
  const double dx = grid.dx(), dy = grid.dy();
  CellRange r;
  r.ix0 = std::max(0, static_cast<int>((center.x - radius - box[0]) / dx));
  r.ix1 = std::min(grid.nx() - 1, static_cast<int>((center.x + radius - box[0]) / dx));
  r.iy0 = std::max(0, static_cast<int>((center.y - radius - box[1]) / dy));
  r.iy1 = std::min(grid.ny() - 1, static_cast<int>((center.y + radius - box[1]) / dy));
  return r;
}

}  // namespace

IntensitySurface::IntensitySurface(std::shared_ptr<const TileGrid> grid,
                                   std::vector<double> values, std::string label)
    : grid_(std::move(grid)), values_(std::move(values)), label_(std::move(label)) {
  require(grid_ != nullptr, Status::Invalid, "intensity surface needs a grid");
  require(values_.size() == grid_->n_cells(), Status::Invalid,
          "intensity surface value count does not match the grid");
  for (double v : values_)
    require(v >= 0.0 && std::isfinite(v), Status::Invalid,
            "intensity values must be finite and nonnegative");
}

IntensitySurface IntensitySurface::constant(std::shared_ptr<const TileGrid> grid,
                                            double value, std::string label) {
  require(grid != nullptr, Status::Invalid, "intensity surface needs a grid");
  std::vector<double> values(grid->n_cells(), value);
  return IntensitySurface(std::move(grid), std::move(values), std::move(label));
}

double IntensitySurface::value_at(Point2 p) const {
  if (!grid_) return 0.0;
  const auto idx = grid_->cell_index(p);
  return idx ? values_[*idx] : 0.0;
}

double IntensitySurface::integral() const {
  double acc = 0.0;
  for (std::size_t c = 0; c < values_.size(); ++c)
    acc += values_[c] * grid_->tile_area(c);
  return acc;
}

double scott_bandwidth(const MarkedPointPattern& pattern, int mark) {
  const auto idx = pattern.indices_of_mark(mark);
  const double fallback = 0.1 * pattern.window.diameter();
  if (idx.size() < 2) return fallback;
  double mx = 0, my = 0;
  for (auto i : idx) {
    mx += pattern.points[i].x;
    my += pattern.points[i].y;
  }
  mx /= idx.size();
  my /= idx.size();
  double vx = 0, vy = 0;
  for (auto i : idx) {
    vx += (pattern.points[i].x - mx) * (pattern.points[i].x - mx);
    vy += (pattern.points[i].y - my) * (pattern.points[i].y - my);
  }
  vx /= idx.size() - 1;
  vy /= idx.size() - 1;
  const double sigma = 0.5 * (std::sqrt(vx) + std::sqrt(vy));
  if (sigma <= 0.0) return fallback;
  return std::pow(static_cast<double>(idx.size()), -1.0 / 6.0) * sigma;
}

std::vector<double> edge_correction_grid(const TileGrid& grid, double bandwidth) {
  require(bandwidth > 0.0, Status::Invalid, "bandwidth must be positive");
  const int nx = grid.nx(), ny = grid.ny();
  const double dx = grid.dx(), dy = grid.dy();

  // separable Gaussian taps out to the cutoff
  auto taps = [&](double step) {
    const int k = std::max(1, static_cast<int>(std::ceil(kKernelCutoff * bandwidth / step)));
    std::vector<double> t(2 * k + 1);
    const double norm = 1.0 / (std::sqrt(kTwoPi) * bandwidth);
    for (int i = -k; i <= k; ++i)
      t[i + k] = norm * std::exp(-0.5 * (i * step) * (i * step) / (bandwidth * bandwidth));
    return t;
  };
  const auto tx = taps(dx);
  const auto ty = taps(dy);
  const int kx = (static_cast<int>(tx.size()) - 1) / 2;
  const int ky = (static_cast<int>(ty.size()) - 1) / 2;

  // convolve tile areas along x, then y
  std::vector<double> rowpass(grid.n_cells(), 0.0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const double a = grid.tile_area(static_cast<std::size_t>(iy) * nx + ix);
      if (a <= 0.0) continue;
      const int j0 = std::max(0, ix - kx), j1 = std::min(nx - 1, ix + kx);
      for (int j = j0; j <= j1; ++j)
        rowpass[static_cast<std::size_t>(iy) * nx + j] += a * tx[j - ix + kx];
    }
  }
  std::vector<double> e(grid.n_cells(), 0.0);
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      const double v = rowpass[static_cast<std::size_t>(iy) * nx + ix];
      if (v == 0.0) continue;
      const int j0 = std::max(0, iy - ky), j1 = std::min(ny - 1, iy + ky);
      for (int j = j0; j <= j1; ++j)
        e[static_cast<std::size_t>(j) * nx + ix] += v * ty[j - iy + ky];
    }
  }
  for (double& v : e) v = std::clamp(v, kEdgeMin, 1.0);
  return e;
}

double edge_correction_at(const TileGrid& grid, double bandwidth, Point2 u) {
  require(bandwidth > 0.0, Status::Invalid, "bandwidth must be positive");
  const auto r = cells_in_disk(grid, u, kKernelCutoff * bandwidth);
  double acc = 0.0;
  for (int iy = r.iy0; iy <= r.iy1; ++iy)
    for (int ix = r.ix0; ix <= r.ix1; ++ix) {
      const std::size_t idx = static_cast<std::size_t>(iy) * grid.nx() + ix;
      const double a = grid.tile_area(idx);
      if (a <= 0.0) continue;
      acc += a * gauss2(squared_distance(u, grid.representative(idx)), bandwidth);
    }
  return std::clamp(acc, kEdgeMin, 1.0);
}

std::vector<double> adaptive_bandwidths(const MarkedPointPattern& pattern,
                                        int mark, double global_bandwidth) {
  require(global_bandwidth > 0.0, Status::Invalid,
          "global bandwidth must be positive");
  const auto idx = pattern.indices_of_mark(mark);
  require(!idx.empty(), Status::Invalid,
          "adaptive bandwidths need at least one point of the mark");

  // fixed-bandwidth pilot at the data points, edge corrected on a scratch grid
  TileGrid scratch(pattern.window, 96, 96);
  std::vector<double> pilot(idx.size(), 0.0);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const Point2 ua = pattern.points[idx[a]];
    double acc = 0.0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const double d2 = squared_distance(ua, pattern.points[idx[b]]);
      if (d2 > kKernelCutoff * kKernelCutoff * global_bandwidth * global_bandwidth)
        continue;
      acc += gauss2(d2, global_bandwidth);
    }
    acc /= edge_correction_at(scratch, global_bandwidth, ua);
    pilot[a] = std::max(acc, kIntensityFloor);
  }

  double log_gmean = 0.0;
  for (double p : pilot) log_gmean += std::log(p);
  log_gmean /= static_cast<double>(pilot.size());

  std::vector<double> bandwidths(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    bandwidths[a] = global_bandwidth * std::exp(0.5 * (log_gmean - std::log(pilot[a])));
  return bandwidths;
}

IntensitySurface estimate_intensity(const MarkedPointPattern& pattern, int mark,
                                    std::span<const double> bandwidths,
                                    std::shared_ptr<const TileGrid> grid,
                                    double global_bandwidth) {
  require(grid != nullptr, Status::Invalid, "estimate_intensity needs a grid");
  const auto idx = pattern.indices_of_mark(mark);
  require(bandwidths.size() == idx.size(), Status::Invalid,
          "one bandwidth per point of the mark is required");
  for (double b : bandwidths)
    require(b > 0.0, Status::Invalid, "bandwidths must be positive");

  std::vector<double> values(grid->n_cells(), 0.0);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const Point2 ua = pattern.points[idx[a]];
    const double eps = bandwidths[a];
    const auto r = cells_in_disk(*grid, ua, kKernelCutoff * eps);
    for (int iy = r.iy0; iy <= r.iy1; ++iy)
      for (int ix = r.ix0; ix <= r.ix1; ++ix) {
        const std::size_t c = static_cast<std::size_t>(iy) * grid->nx() + ix;
        if (grid->tile_area(c) <= 0.0) continue;
        values[c] += gauss2(squared_distance(grid->representative(c), ua), eps);
      }
  }
  if (!idx.empty()) {
    const auto e = edge_correction_grid(*grid, global_bandwidth);
    for (std::size_t c = 0; c < values.size(); ++c)
      if (grid->tile_area(c) > 0.0) values[c] /= e[c];
  }
  return IntensitySurface(std::move(grid), std::move(values),
                          "B[" + std::to_string(mark) + "]");
}

IntensitySurface total_intensity(std::span<const IntensitySurface> surfaces) {
  require(!surfaces.empty(), Status::Invalid, "total_intensity needs surfaces");
  const auto& grid0 = surfaces.front().grid();
  std::vector<double> values(grid0.n_cells(), 0.0);
  for (const auto& surface : surfaces) {
    require(surface.grid_ptr().get() == &grid0 || surface.grid().same_geometry(grid0),
            Status::Invalid, "total_intensity: surfaces use different grids");
    for (std::size_t c = 0; c < values.size(); ++c)
      values[c] += surface.values()[c];
  }
  return IntensitySurface(surfaces.front().grid_ptr(), std::move(values), "total");
}

}  // namespace mtg
