#include "interactions.hpp"

#include <algorithm>
#include <cmath>

namespace mtg {

double PairMatrix::max_finite() const {
  double best = 0.0;
  for (double x : v_)
    if (std::isfinite(x)) best = std::max(best, x);
  return best;
}

bool PairMatrix::has_nan() const {
  for (double x : v_)
    if (std::isnan(x)) return true;
  return false;
}

const char* interaction_kind_name(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::None: return "none";
    case InteractionKind::Fiksel: return "fiksel";
    case InteractionKind::FikselWithinOnly: return "fiksel-within-only";
    case InteractionKind::Strauss: return "strauss";
    case InteractionKind::Hardcore: return "hardcore";
    case InteractionKind::StraussHardcore: return "strauss-hardcore";
  }
  return "?";
}

InteractionKind parse_interaction_kind(const std::string& name) {
  for (InteractionKind k :
       {InteractionKind::None, InteractionKind::Fiksel,
        InteractionKind::FikselWithinOnly, InteractionKind::Strauss,
        InteractionKind::Hardcore, InteractionKind::StraussHardcore})
    if (name == interaction_kind_name(k)) return k;
  fail(Status::Schema, "unknown interaction kind '" + name + "'");
}

InteractionSpec InteractionSpec::none(int n_marks) {
  InteractionSpec s;
  s.kind = InteractionKind::None;
  s.n_marks = n_marks;
  return s;
}

InteractionSpec InteractionSpec::fiksel(PairMatrix h, PairMatrix R,
                                        PairMatrix gamma, bool within_only) {
  InteractionSpec s;
  s.kind = within_only ? InteractionKind::FikselWithinOnly : InteractionKind::Fiksel;
  s.n_marks = h.size();
  s.hardcore = std::move(h);
  s.irange = std::move(R);
  s.rate = std::move(gamma);
  s.validate();
  return s;
}

InteractionSpec InteractionSpec::strauss(PairMatrix R) {
  InteractionSpec s;
  s.kind = InteractionKind::Strauss;
  s.n_marks = R.size();
  s.irange = std::move(R);
  s.validate();
  return s;
}

InteractionSpec InteractionSpec::hardcore_model(PairMatrix R) {
  InteractionSpec s;
  s.kind = InteractionKind::Hardcore;
  s.n_marks = R.size();
  s.irange = std::move(R);
  s.validate();
  return s;
}

InteractionSpec InteractionSpec::strauss_hardcore(PairMatrix h, PairMatrix R) {
  InteractionSpec s;
  s.kind = InteractionKind::StraussHardcore;
  s.n_marks = h.size();
  s.hardcore = std::move(h);
  s.irange = std::move(R);
  s.validate();
  return s;
}

int InteractionSpec::n_coefficients() const {
  switch (kind) {
    case InteractionKind::None:
    case InteractionKind::Hardcore:
      return 0;
    case InteractionKind::FikselWithinOnly:
      return n_marks;
    default:
      return n_marks * (n_marks + 1) / 2;
  }
}

std::vector<std::pair<int, int>> InteractionSpec::coefficient_pairs() const {
  std::vector<std::pair<int, int>> out;
  if (kind == InteractionKind::None || kind == InteractionKind::Hardcore) return out;
  if (kind == InteractionKind::FikselWithinOnly) {
    for (int i = 0; i < n_marks; ++i) out.emplace_back(i, i);
    return out;
  }
  for (int i = 0; i < n_marks; ++i)
    for (int j = i; j < n_marks; ++j) out.emplace_back(i, j);
  return out;
}

int InteractionSpec::coefficient_index(int i, int j) const {
  if (kind == InteractionKind::None || kind == InteractionKind::Hardcore) return -1;
  if (i > j) std::swap(i, j);
  if (kind == InteractionKind::FikselWithinOnly) return i == j ? i : -1;
  return i * n_marks - i * (i - 1) / 2 + (j - i);
}

std::vector<std::string> InteractionSpec::coefficient_names(
    const MarkSet& marks) const {
  std::vector<std::string> names;
  for (auto [i, j] : coefficient_pairs())
    names.push_back("strength[" + marks.label(i) + ":" + marks.label(j) + "]");
  return names;
}

double InteractionSpec::max_interaction_distance() const {
  if (kind == InteractionKind::None) return 0.0;
  if (kind == InteractionKind::FikselWithinOnly) {
    double best = 0.0;
    for (int i = 0; i < n_marks; ++i)
      if (std::isfinite(irange(i, i))) best = std::max(best, irange(i, i));
    return best;
  }
  return irange.max_finite();
}

void InteractionSpec::validate() const {
  require(n_marks >= 1, Status::Invalid, "interaction spec needs marks");
  if (kind == InteractionKind::None) return;
  auto check_pair = [&](int i, int j) {
    const bool uses_h = kind == InteractionKind::Fiksel ||
                        kind == InteractionKind::FikselWithinOnly ||
                        kind == InteractionKind::StraussHardcore;
    const double h = uses_h ? hardcore(i, j) : 0.0;
    const double R = irange(i, j);
    require(std::isfinite(R) && R >= 0.0, Status::Invalid,
            "interaction range must be finite and nonnegative");
    if (uses_h) {
      require(std::isfinite(h) && h >= 0.0, Status::Invalid,
              "hardcore distance must be finite and nonnegative");
      require(R > h, Status::Invalid,
              "interaction range must exceed the hardcore distance");
    }
    if (kind == InteractionKind::Fiksel || kind == InteractionKind::FikselWithinOnly)
      require(std::isfinite(rate(i, j)), Status::Invalid,
              "interaction rate must be finite");
  };
  if (kind == InteractionKind::FikselWithinOnly) {
    for (int i = 0; i < n_marks; ++i) check_pair(i, i);
  } else {
    for (int i = 0; i < n_marks; ++i)
      for (int j = i; j < n_marks; ++j) check_pair(i, j);
  }
}

double fiksel_phi(const InteractionSpec& spec, int i, int j, double r, double c) {
  require(r >= 0.0, Status::Invalid, "distance must be nonnegative");
  if (r < spec.hardcore(i, j)) return kNegInf;
  if (r < spec.irange(i, j)) return c * std::exp(-spec.rate(i, j) * r);
  return 0.0;
}

double table2_phi(InteractionKind kind, double r, double h, double R,
                  double log_gamma) {
  require(r >= 0.0, Status::Invalid, "distance must be nonnegative");
  switch (kind) {
    case InteractionKind::Strauss:
      return r <= R ? log_gamma : 0.0;
    case InteractionKind::Hardcore:
      // the tabulated cases overlap at r = R; exclusion wins on the boundary
      return r <= R ? kNegInf : 0.0;
    case InteractionKind::StraussHardcore:
      if (r < h) return kNegInf;
      return r <= R ? log_gamma : 0.0;
    default:
      fail(Status::Invalid, "table2_phi expects a Strauss/Hardcore-family kind");
  }
}

PairMatrix estimate_hardcore(const Cohort& cohort,
                             std::vector<std::pair<int, int>>* missing) {
  const int M = cohort.marks.size();
  PairMatrix h(M, std::numeric_limits<double>::quiet_NaN());
  if (missing) missing->clear();
  for (int i = 0; i < M; ++i) {
    for (int j = i; j < M; ++j) {
      double best = std::numeric_limits<double>::infinity();
      bool seen = false;
      for (const auto& patient : cohort.patients) {
        const auto d = min_cross_nn_distance(patient.pattern, i, j);
        if (!d) continue;
        require(*d > 0.0, Status::Degenerate,
                "duplicate points force a zero hardcore distance (patient '" +
                    patient.pattern.id + "', marks " + cohort.marks.label(i) +
                    "/" + cohort.marks.label(j) + ")");
        best = std::min(best, *d);
        seen = true;
      }
      if (seen) {
        h.set(i, j, best);
      } else if (missing) {
        missing->emplace_back(i, j);
      }
    }
  }
  return h;
}

SufficientStats sufficient_statistics(Point2 u, int mark,
                                      const MarkedPointPattern& pattern,
                                      const InteractionSpec& spec,
                                      long exclude_index) {
  return accumulate_interaction_stats(
      u, mark, pattern.points, pattern.marks, spec, exclude_index,
      [&](auto&& fn) {
        for (std::size_t i = 0; i < pattern.size(); ++i) fn(i);
      });
}

PatternNeighborhood::PatternNeighborhood(const MarkedPointPattern& pattern,
                                         double radius)
    : pattern_(&pattern) {
  if (pattern.size() < 1000 || radius <= 0.0) return;
  const auto box = pattern.window.bbox();
  cell_ = radius;
  x0_ = box[0];
  y0_ = box[1];
  nx_ = std::max(1, static_cast<int>(std::ceil((box[2] - box[0]) / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil((box[3] - box[1]) / cell_)));
  // cap the bucket table; extremely small radii fall back to a linear scan
  if (static_cast<long long>(nx_) * ny_ > 4'000'000) return;
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    int cx = std::clamp(cell_of(pattern.points[i].x - x0_), 0, nx_ - 1);
    int cy = std::clamp(cell_of(pattern.points[i].y - y0_), 0, ny_ - 1);
    buckets_[static_cast<std::size_t>(cy) * nx_ + cx].push_back(i);
  }
  use_grid_ = true;
}

SufficientStats PatternNeighborhood::stats(Point2 u, int mark,
                                           const InteractionSpec& spec,
                                           long exclude_index) const {
  return accumulate_interaction_stats(u, mark, pattern_->points, pattern_->marks,
                                      spec, exclude_index,
                                      [&](auto&& fn) { for_candidates(u, fn); });
}

}  // namespace mtg
