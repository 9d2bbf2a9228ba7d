#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patterns.hpp"

namespace mtg {

// Symmetric M×M parameter matrix indexed by mark pair. Entries may be NaN to
// mark values that could not be estimated.
class PairMatrix {
 public:
  PairMatrix() = default;
  explicit PairMatrix(int n_marks, double fill = 0.0)
      : n_(n_marks), v_(static_cast<std::size_t>(n_marks) * n_marks, fill) {}

  int size() const { return n_; }
  double operator()(int i, int j) const {
    return v_[static_cast<std::size_t>(i) * n_ + j];
  }
  void set(int i, int j, double value) {
    v_[static_cast<std::size_t>(i) * n_ + j] = value;
    v_[static_cast<std::size_t>(j) * n_ + i] = value;
  }
  double max_finite() const;
  bool has_nan() const;

 private:
  int n_ = 0;
  std::vector<double> v_;
};

enum class InteractionKind {
  None,
  Fiksel,
  FikselWithinOnly,
  Strauss,
  Hardcore,
  StraussHardcore,
};

const char* interaction_kind_name(InteractionKind kind);
InteractionKind parse_interaction_kind(const std::string& name);

// A multitype pairwise interaction with its irregular parameter matrices.
// Matrices used per kind: Fiksel/within-only h, R, gamma; Strauss R;
// Hardcore R (the exclusion distance); StraussHardcore h, R. The regular
// strength coefficients multiply the sufficient statistics inside the
// log-linear conditional intensity; their layout is one coefficient per
// unordered pair, restricted to same-type pairs for the within-only variant.
struct InteractionSpec {
  InteractionKind kind = InteractionKind::None;
  int n_marks = 0;
  PairMatrix hardcore;  // h_ij
  PairMatrix irange;    // R_ij
  PairMatrix rate;      // gamma_ij

  static InteractionSpec none(int n_marks);
  static InteractionSpec fiksel(PairMatrix h, PairMatrix R, PairMatrix gamma,
                                bool within_only = false);
  static InteractionSpec strauss(PairMatrix R);
  static InteractionSpec hardcore_model(PairMatrix R);
  static InteractionSpec strauss_hardcore(PairMatrix h, PairMatrix R);

  int n_coefficients() const;
  std::vector<std::pair<int, int>> coefficient_pairs() const;  // i <= j
  int coefficient_index(int i, int j) const;                   // -1 when absent
  std::vector<std::string> coefficient_names(const MarkSet& marks) const;

  // Largest distance at which any pair of marks interacts or excludes.
  double max_interaction_distance() const;
  void validate() const;
};

// Eq.-(2)-style pair potential: -inf below h, c*exp(-gamma*r) on [h, R), 0
// beyond. The strength c is supplied by the caller (it is a regular
// coefficient); this helper evaluates the potential with strength c.
double fiksel_phi(const InteractionSpec& spec, int i, int j, double r, double c);

// Alternatives exactly as tabulated: Strauss log(gamma) on r <= R; Hardcore
// -inf on r <= R; StraussHardcore -inf below h, log(gamma) on [h, R], 0 above.
double table2_phi(InteractionKind kind, double r, double h, double R,
                  double log_gamma);

// Minimum cross-type nearest-neighbour distances, minimised over replicates.
// Pairs never observable are reported through `missing` and set to NaN.
PairMatrix estimate_hardcore(const Cohort& cohort,
                             std::vector<std::pair<int, int>>* missing = nullptr);

struct SufficientStats {
  std::vector<double> values;   // one slot per spec coefficient
  bool hardcore_violated = false;
};

// Statistic accumulation shared by fitting and simulation. ForEach enumerates
// candidate indices into the point/mark arrays; distances are re-checked here,
// so enumerating supersets (hash buckets) is fine.
template <typename ForEach>
SufficientStats accumulate_interaction_stats(Point2 u, int mark,
                                             std::span<const Point2> points,
                                             std::span<const int> marks,
                                             const InteractionSpec& spec,
                                             long exclude_index,
                                             ForEach&& for_each_candidate) {
  SufficientStats out;
  out.values.assign(spec.n_coefficients(), 0.0);
  if (spec.kind == InteractionKind::None) return out;

  const bool within_only = spec.kind == InteractionKind::FikselWithinOnly;
  for_each_candidate([&](std::size_t k) {
    if (static_cast<long>(k) == exclude_index) return;
    const int mk = marks[k];
    if (within_only && mk != mark) return;
    const double d2 = squared_distance(u, points[k]);

    switch (spec.kind) {
      case InteractionKind::Fiksel:
      case InteractionKind::FikselWithinOnly: {
        const double h = spec.hardcore(mark, mk);
        // r = h is allowed; the relative guard keeps the pair that defined an
        // estimated hardcore distance from tripping its own bound
        if (d2 < h * h * (1.0 - 1e-12)) {
          out.hardcore_violated = true;
          return;
        }
        const double R = spec.irange(mark, mk);
        if (d2 < R * R) {
          const double d = std::sqrt(d2);
          out.values[spec.coefficient_index(mark, mk)] +=
              std::exp(-spec.rate(mark, mk) * d);
        }
        break;
      }
      case InteractionKind::Strauss: {
        const double R = spec.irange(mark, mk);
        if (d2 <= R * R) out.values[spec.coefficient_index(mark, mk)] += 1.0;
        break;
      }
      case InteractionKind::Hardcore: {
        const double R = spec.irange(mark, mk);
        if (d2 <= R * R) out.hardcore_violated = true;
        break;
      }
      case InteractionKind::StraussHardcore: {
        const double h = spec.hardcore(mark, mk);
        if (d2 < h * h * (1.0 - 1e-12)) {
          out.hardcore_violated = true;
          return;
        }
        const double R = spec.irange(mark, mk);
        if (d2 <= R * R) out.values[spec.coefficient_index(mark, mk)] += 1.0;
        break;
      }
      case InteractionKind::None:
        break;
    }
  });
  return out;
}

// Interaction statistics of a candidate (u, mark) against a pattern, excluding
// the data point at exclude_index (for the conditional intensity at data
// points). The hardcore flag reports an excluded configuration, in which case
// the conditional intensity is zero.
SufficientStats sufficient_statistics(Point2 u, int mark,
                                      const MarkedPointPattern& pattern,
                                      const InteractionSpec& spec,
                                      long exclude_index = -1);

// Uniform spatial hash over a fixed pattern for repeated range queries; falls
// back to a linear scan below 1,000 points.
class PatternNeighborhood {
 public:
  PatternNeighborhood(const MarkedPointPattern& pattern, double radius);

  // Calls fn(point_index) for every point within `radius` of u (superset:
  // callers must re-check distances).
  template <typename Fn>
  void for_candidates(Point2 u, Fn&& fn) const {
    if (!use_grid_) {
      for (std::size_t i = 0; i < pattern_->size(); ++i) fn(i);
      return;
    }
    const int cx = cell_of(u.x - x0_);
    const int cy = cell_of(u.y - y0_);
    for (int iy = cy - 1; iy <= cy + 1; ++iy) {
      if (iy < 0 || iy >= ny_) continue;
      for (int ix = cx - 1; ix <= cx + 1; ++ix) {
        if (ix < 0 || ix >= nx_) continue;
        for (std::size_t i : buckets_[static_cast<std::size_t>(iy) * nx_ + ix])
          fn(i);
      }
    }
  }

  SufficientStats stats(Point2 u, int mark, const InteractionSpec& spec,
                        long exclude_index = -1) const;

 private:
  int cell_of(double offset) const {
    int c = static_cast<int>(offset / cell_);
    return c;
  }

  const MarkedPointPattern* pattern_ = nullptr;
  bool use_grid_ = false;
  double cell_ = 1.0, x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace mtg
