#include "summaries.hpp"

#include <algorithm>
#include <cmath>

namespace mtg {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

std::vector<double> default_r_grid(const PolygonalWindow& window, int n) {
  require(n >= 2, Status::Invalid, "r grid needs at least 2 points");
  const double rmax = window.diameter() / 4.0;
  std::vector<double> grid(n);
  for (int k = 0; k < n; ++k) grid[k] = rmax * k / (n - 1);
  return grid;
}

SummaryFunction k_inhom_cross(const MarkedPointPattern& pattern, int mark_i,
                              int mark_j, const IntensitySurface& intensity_i,
                              const IntensitySurface& intensity_j,
                              std::span<const double> r_grid) {
  require(!r_grid.empty(), Status::Invalid, "empty r grid");
  for (std::size_t k = 1; k < r_grid.size(); ++k)
    require(r_grid[k] > r_grid[k - 1], Status::Invalid,
            "r grid must be strictly increasing");
  const double rmax = r_grid.back();
  require(rmax <= pattern.window.diameter() / 4.0 + 1e-9, Status::Invalid,
          "r grid may not exceed a quarter of the window diameter");

  SummaryFunction out;
  out.r.assign(r_grid.begin(), r_grid.end());
  out.value.assign(r_grid.size(), 0.0);
  out.mark_i = mark_i;
  out.mark_j = mark_j;

  const auto idx_i = pattern.indices_of_mark(mark_i);
  const auto idx_j = pattern.indices_of_mark(mark_j);
  if (idx_i.empty() || idx_j.empty() ||
      (mark_i == mark_j && idx_i.size() < 2)) {
    out.is_empty = true;
    return out;
  }

  auto floored = [](double b) { return std::max(b, kIntensityFloor); };
  const double window_area = pattern.window.area();

  std::vector<std::pair<double, double>> contributions;  // (distance, weight)
  auto add_pair = [&](std::size_t a, std::size_t b, double multiplier) {
    const double d2 = squared_distance(pattern.points[a], pattern.points[b]);
    if (d2 > rmax * rmax) return;
    const double dx = pattern.points[b].x - pattern.points[a].x;
    const double dy = pattern.points[b].y - pattern.points[a].y;
    const double overlap = translation_overlap_area(pattern.window, dx, dy);
    require(overlap > 0.0, Status::Internal,
            "translation correction with empty overlap");
    const double correction = window_area / overlap;
    const double weight =
        multiplier * correction /
        (floored(intensity_i.value_at(pattern.points[a])) *
         floored(intensity_j.value_at(pattern.points[b])));
    contributions.emplace_back(std::sqrt(d2), weight);
  };

  if (mark_i == mark_j) {
    for (std::size_t a = 0; a < idx_i.size(); ++a)
      for (std::size_t b = a + 1; b < idx_i.size(); ++b)
        add_pair(idx_i[a], idx_i[b], 2.0);  // both ordered directions
  } else {
    for (const std::size_t a : idx_i)
      for (const std::size_t b : idx_j) add_pair(a, b, 1.0);
  }

  std::sort(contributions.begin(), contributions.end());
  double acc = 0.0;
  std::size_t next = 0;
  for (std::size_t k = 0; k < out.r.size(); ++k) {
    while (next < contributions.size() && contributions[next].first <= out.r[k]) {
      acc += contributions[next].second;
      ++next;
    }
    out.value[k] = acc / window_area;
  }
  return out;
}

SummaryFunction l_from_k(const SummaryFunction& k) {
  SummaryFunction out = k;
  out.kind = "L";
  for (std::size_t i = 0; i < out.value.size(); ++i) {
    require(k.value[i] >= 0.0, Status::Invalid, "K values must be nonnegative");
    out.value[i] = std::sqrt(k.value[i] / kPi);
  }
  return out;
}

SummaryFunction pool_functions(std::span<const SummaryFunction> per_patient) {
  require(!per_patient.empty(), Status::Invalid, "nothing to pool");
  const SummaryFunction* first = nullptr;
  for (const auto& f : per_patient)
    if (!f.is_empty) {
      first = &f;
      break;
    }
  require(first != nullptr, Status::Invalid,
          "all replicates are empty for this pair");

  SummaryFunction out;
  out.r = first->r;
  out.kind = first->kind;
  out.mark_i = first->mark_i;
  out.mark_j = first->mark_j;
  out.value.assign(out.r.size(), 0.0);
  std::size_t used = 0;
  for (const auto& f : per_patient) {
    if (f.is_empty) continue;
    require(f.kind == out.kind, Status::Invalid, "pooling mixed function kinds");
    require(f.r.size() == out.r.size(), Status::Invalid,
            "pooling needs identical r grids");
    for (std::size_t k = 0; k < out.r.size(); ++k) {
      require(std::abs(f.r[k] - out.r[k]) <= 1e-12 * (1.0 + out.r[k]),
              Status::Invalid, "pooling needs identical r grids");
      out.value[k] += f.value[k];
    }
    ++used;
  }
  for (double& v : out.value) v /= static_cast<double>(used);
  return out;
}

double suggest_max_range(const SummaryFunction& pooled_l) {
  require(pooled_l.kind == "L", Status::Invalid,
          "max-range suggestion expects an L function");
  const auto& r = pooled_l.r;
  const std::size_t n = r.size();
  if (n < 6) return r.empty() ? 0.0 : r.back();
  for (std::size_t k = n - 1; k >= 5; --k) {
    const double d1 = std::abs(pooled_l.value[k] - r[k]);
    const double d0 = std::abs(pooled_l.value[k - 5] - r[k - 5]);
    const double slope = (d1 - d0) / (r[k] - r[k - 5]);
    if (std::abs(slope) < 0.01) return r[k];
  }
  return r.back();
}

}  // namespace mtg
