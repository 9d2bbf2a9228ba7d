#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "patterns.hpp"

namespace mtg {

// First-order intensity values (points per µm²) on a tile grid.
class IntensitySurface {
 public:
  IntensitySurface() = default;
  IntensitySurface(std::shared_ptr<const TileGrid> grid,
                   std::vector<double> values, std::string label);
  static IntensitySurface constant(std::shared_ptr<const TileGrid> grid,
                                   double value, std::string label = "constant");

  const TileGrid& grid() const { return *grid_; }
  const std::shared_ptr<const TileGrid>& grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::string& label() const { return label_; }

  // Piecewise-constant lookup; zero outside the grid.
  double value_at(Point2 p) const;
  double integral() const;

 private:
  std::shared_ptr<const TileGrid> grid_;
  std::vector<double> values_;
  std::string label_;
};

// Scott's rule h0 = n^(-1/6) * mean coordinate standard deviation. Falls back
// to a tenth of the window diameter when the mark has fewer than two points or
// zero spread.
double scott_bandwidth(const MarkedPointPattern& pattern, int mark);

// Abramson bandwidths eps_i = h0 * sqrt(gmean / pilot_i), where the pilot is a
// fixed-bandwidth estimate at the data points (edge corrected, floored at 1e-12).
std::vector<double> adaptive_bandwidths(const MarkedPointPattern& pattern,
                                        int mark, double global_bandwidth);

// Gaussian kernel estimate of the mark intensity at tile representatives, with
// the uniform edge correction e(u) = ∫_W K_h0(u - v) dv computed on the grid.
IntensitySurface estimate_intensity(const MarkedPointPattern& pattern, int mark,
                                    std::span<const double> bandwidths,
                                    std::shared_ptr<const TileGrid> grid,
                                    double global_bandwidth);

// Cellwise sum across marks; grids must match.
IntensitySurface total_intensity(std::span<const IntensitySurface> surfaces);

// Uniform edge correction values at each tile, computed by separable
// convolution of the tile-area matrix with the Gaussian kernel.
std::vector<double> edge_correction_grid(const TileGrid& grid, double bandwidth);
double edge_correction_at(const TileGrid& grid, double bandwidth, Point2 u);

inline constexpr double kIntensityFloor = 1e-12;  // keeps log offsets finite

}  // namespace mtg
