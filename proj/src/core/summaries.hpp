#pragma once

#include <span>
#include <string>
#include <vector>

#include "intensity.hpp"

namespace mtg {

// K- or L-function values for one mark pair on a common r grid.
struct SummaryFunction {
  std::vector<double> r;
  std::vector<double> value;
  int mark_i = -1;
  int mark_j = -1;
  bool is_empty = false;  // no point pair available; values are all zero
  std::string kind = "K";
};

// 512 equal steps from 0 to a quarter of the window diameter.
std::vector<double> default_r_grid(const PolygonalWindow& window, int n = 512);

// Inhomogeneous cross K with translation edge correction
// e(u,v) = |W| / |W ∩ W_{+(v-u)}|; intensities are floored at 1e-12.
// Distinct points only when i = j.
SummaryFunction k_inhom_cross(const MarkedPointPattern& pattern, int mark_i,
                              int mark_j, const IntensitySurface& intensity_i,
                              const IntensitySurface& intensity_j,
                              std::span<const double> r_grid);

// L(r) = sqrt(K(r) / pi), pointwise.
SummaryFunction l_from_k(const SummaryFunction& k);

// Pointwise mean over replicates, skipping curves flagged empty.
SummaryFunction pool_functions(std::span<const SummaryFunction> per_patient);

// Largest r at which |L(r) - r| has settled: the trailing 5-step slope of the
// deviation falls below 1%. Heuristic default for the interaction range bound;
// callers may override it.
double suggest_max_range(const SummaryFunction& pooled_l);

}  // namespace mtg
