#include "simulation.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"

namespace mtg {

void SimulationConfig::validate() const {
  require(p_birth >= 0 && p_death >= 0 && p_shift >= 0, Status::Invalid,
          "proposal probabilities must be nonnegative");
  require(std::abs(p_birth + p_death + p_shift - 1.0) <= 1e-9, Status::Invalid,
          "proposal probabilities must sum to one");
  require(steps > 0, Status::Invalid, "steps must be positive");
  require(burnin >= 0 && steps > burnin, Status::Invalid,
          "steps must exceed the burn-in");
}

Trend Trend::constant(std::vector<double> levels) {
  Trend t;
  for (double v : levels)
    require(v >= 0.0 && std::isfinite(v), Status::Invalid,
            "trend levels must be finite and nonnegative");
  t.levels_ = std::move(levels);
  return t;
}

Trend Trend::from_surfaces(std::vector<IntensitySurface> surfaces) {
  Trend t;
  require(!surfaces.empty(), Status::Invalid, "trend needs surfaces");
  t.levels_.assign(surfaces.size(), 1.0);
  t.surfaces_ = std::move(surfaces);
  return t;
}

double Trend::value(Point2 u, int mark) const {
  const double level = levels_.at(mark);
  if (surfaces_.empty()) return level;
  return level * surfaces_[mark].value_at(u);
}

double Trend::max_level(int mark) const {
  const double level = levels_.at(mark);
  if (surfaces_.empty()) return level;
  double top = 0.0;
  for (double v : surfaces_[mark].values()) top = std::max(top, v);
  return level * top;
}

Trend Trend::scaled(double factor) const {
  require(factor > 0.0 && std::isfinite(factor), Status::Invalid,
          "trend scale factor must be positive");
  Trend t = *this;
  for (double& v : t.levels_) v *= factor;
  return t;
}

double papangelou_ratio(Point2 u, int mark, const MarkedPointPattern& pattern,
                        const Trend& trend, const InteractionSpec& spec,
                        std::span<const double> strengths, long exclude_index) {
  require(static_cast<int>(strengths.size()) == spec.n_coefficients(),
          Status::Invalid, "one strength per interaction coefficient required");
  const auto stats = sufficient_statistics(u, mark, pattern, spec, exclude_index);
  if (stats.hardcore_violated) return 0.0;
  double log_lambda = std::log(std::max(trend.value(u, mark), 0.0));
  for (std::size_t k = 0; k < strengths.size(); ++k)
    log_lambda += strengths[k] * stats.values[k];
  return std::exp(log_lambda);
}

double local_stability_log_bound(const Trend& trend, const InteractionSpec& spec,
                                 std::span<const double> strengths) {
  require(static_cast<int>(strengths.size()) == spec.n_coefficients(),
          Status::Invalid, "one strength per interaction coefficient required");
  const int M = spec.n_marks;
  double bound = kNegInf;
  for (int m = 0; m < M; ++m) {
    double b = std::log(std::max(trend.max_level(m), kIntensityFloor));
    for (int j = 0; j < M; ++j) {
      const int idx = spec.coefficient_index(m, j);
      if (idx < 0) continue;
      const double c = strengths[idx];
      if (c <= 0.0) continue;

      // points of mark j must keep their own hardcore distance apart; that
      // packing bound caps the statistic per candidate
      const bool has_hardcore = spec.kind == InteractionKind::Fiksel ||
                                spec.kind == InteractionKind::FikselWithinOnly ||
                                spec.kind == InteractionKind::StraussHardcore;
      const double pack = has_hardcore ? spec.hardcore(j, j) : 0.0;
      if (pack <= 0.0) return std::numeric_limits<double>::infinity();
      const double R = spec.irange(m, j);
      const double ratio = (R + 0.5 * pack) / (0.5 * pack);
      const double max_count = ratio * ratio;

      double per_neighbor = 1.0;
      if (spec.kind == InteractionKind::Fiksel ||
          spec.kind == InteractionKind::FikselWithinOnly) {
        const double gamma = spec.rate(m, j);
        per_neighbor = gamma >= 0.0 ? std::exp(-gamma * spec.hardcore(m, j))
                                    : std::exp(-gamma * R);
      }
      b += c * max_count * per_neighbor;
    }
    bound = std::max(bound, b);
  }
  return bound;
}

namespace {

// Uniform draws over a (possibly multi-component) window: pick an outer ring
// by area, reject within its bounding box.
class WindowSampler {
 public:
  explicit WindowSampler(const PolygonalWindow& window) : window_(&window) {
    for (const Ring& ring : window.rings()) {
      double a2 = 0.0;
      double x0 = ring[0].x, x1 = ring[0].x, y0 = ring[0].y, y1 = ring[0].y;
      const std::size_t n = ring.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Point2& p = ring[i];
        const Point2& q = ring[(i + 1) % n];
        a2 += p.x * q.y - q.x * p.y;
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
      if (a2 <= 0.0) continue;  // holes are handled by the containment test
      components_.push_back({0.5 * a2, x0, y0, x1, y1});
      total_ += 0.5 * a2;
    }
    require(!components_.empty() && total_ > 0.0, Status::Geometry,
            "window has no positive-area component");
  }

  Point2 draw(Rng& rng) const {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      double pick = rng.uniform() * total_;
      std::size_t c = 0;
      for (; c + 1 < components_.size(); ++c) {
        if (pick < components_[c].area) break;
        pick -= components_[c].area;
      }
      const auto& box = components_[c];
      const Point2 p{rng.uniform(box.x0, box.x1), rng.uniform(box.y0, box.y1)};
      if (window_->contains(p)) return p;
    }
    fail(Status::Internal, "uniform window sampling failed to land a point");
  }

 private:
  struct Component {
    double area, x0, y0, x1, y1;
  };
  const PolygonalWindow* window_;
  std::vector<Component> components_;
  double total_ = 0.0;
};

// Mutable configuration with a uniform bucket grid for neighbour queries.
class ChainState {
 public:
  ChainState(const PolygonalWindow& window, double interaction_distance) {
    const auto box = window.bbox();
    x0_ = box[0];
    y0_ = box[1];
    if (interaction_distance > 0.0) {
      nx_ = std::max(1, static_cast<int>(std::ceil((box[2] - box[0]) /
                                                   interaction_distance)));
      ny_ = std::max(1, static_cast<int>(std::ceil((box[3] - box[1]) /
                                                   interaction_distance)));
      if (static_cast<long long>(nx_) * ny_ <= 4'000'000) {
        cell_ = interaction_distance;
        buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
        use_grid_ = true;
      }
    }
  }

  std::size_t size() const { return points_.size(); }
  Point2 point(std::size_t i) const { return points_[i]; }
  int mark(std::size_t i) const { return marks_[i]; }
  std::span<const Point2> points() const { return points_; }
  std::span<const int> marks() const { return marks_; }

  void insert(Point2 p, int m) {
    points_.push_back(p);
    marks_.push_back(m);
    if (use_grid_) {
      const std::size_t b = bucket_index(p);
      bucket_of_.push_back(b);
      buckets_[b].push_back(points_.size() - 1);
    }
  }

  void remove(std::size_t idx) {
    const std::size_t last = points_.size() - 1;
    if (use_grid_) {
      erase_from_bucket(bucket_of_[idx], idx);
      if (idx != last) {
        erase_from_bucket(bucket_of_[last], last);
        bucket_of_[idx] = bucket_of_[last];
        buckets_[bucket_of_[idx]].push_back(idx);
      }
      bucket_of_.pop_back();
    }
    if (idx != last) {
      points_[idx] = points_[last];
      marks_[idx] = marks_[last];
    }
    points_.pop_back();
    marks_.pop_back();
  }

  SufficientStats stats(Point2 u, int m, const InteractionSpec& spec,
                        long exclude_index) const {
    return accumulate_interaction_stats(
        u, m, points(), marks(), spec, exclude_index, [&](auto&& fn) {
          if (!use_grid_) {
            for (std::size_t i = 0; i < points_.size(); ++i) fn(i);
            return;
          }
          const int cx = static_cast<int>((u.x - x0_) / cell_);
          const int cy = static_cast<int>((u.y - y0_) / cell_);
          for (int iy = cy - 1; iy <= cy + 1; ++iy) {
            if (iy < 0 || iy >= ny_) continue;
            for (int ix = cx - 1; ix <= cx + 1; ++ix) {
              if (ix < 0 || ix >= nx_) continue;
              for (std::size_t i :
                   buckets_[static_cast<std::size_t>(iy) * nx_ + ix])
                fn(i);
            }
          }
        });
  }

 private:
  std::size_t bucket_index(Point2 p) const {
    const int cx = std::clamp(static_cast<int>((p.x - x0_) / cell_), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>((p.y - y0_) / cell_), 0, ny_ - 1);
    return static_cast<std::size_t>(cy) * nx_ + cx;
  }
  void erase_from_bucket(std::size_t bucket, std::size_t idx) {
    auto& entries = buckets_[bucket];
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (entries[k] == idx) {
        entries[k] = entries.back();
        entries.pop_back();
        return;
      }
    }
    fail(Status::Internal, "chain state bucket bookkeeping lost a point");
  }

  std::vector<Point2> points_;
  std::vector<int> marks_;
  bool use_grid_ = false;
  double cell_ = 0.0, x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
  std::vector<std::size_t> bucket_of_;
};

double state_log_lambda(const ChainState& state, Point2 u, int mark,
                        const Trend& trend, const InteractionSpec& spec,
                        std::span<const double> strengths, long exclude) {
  const auto stats = state.stats(u, mark, spec, exclude);
  if (stats.hardcore_violated) return kNegInf;
  double log_lambda = std::log(std::max(trend.value(u, mark), 0.0));
  for (std::size_t k = 0; k < strengths.size(); ++k)
    log_lambda += strengths[k] * stats.values[k];
  return log_lambda;
}

}  // namespace

MarkedPointPattern sample_poisson(const PolygonalWindow& window,
                                  const MarkSet& marks, const Trend& trend,
                                  Rng& rng) {
  require(trend.n_marks() == marks.size(), Status::Invalid,
          "trend/mark count mismatch");
  WindowSampler sampler(window);
  MarkedPointPattern pattern;
  pattern.id = "poisson";
  pattern.window = window;
  for (int m = 0; m < marks.size(); ++m) {
    const double top = trend.max_level(m);
    if (top <= 0.0) continue;
    const long n = rng.poisson(top * window.area());
    for (long i = 0; i < n; ++i) {
      const Point2 p = sampler.draw(rng);
      if (trend.value(p, m) < top * rng.uniform()) continue;  // thinning
      pattern.points.push_back(p);
      pattern.marks.push_back(m);
    }
  }
  return pattern;
}

MarkedPointPattern mh_sample(const PolygonalWindow& window, const MarkSet& marks,
                             const Trend& trend, const InteractionSpec& spec,
                             std::span<const double> strengths,
                             const SimulationConfig& config,
                             std::vector<TraceEntry>* trace, long trace_every) {
  config.validate();
  spec.validate();
  require(trend.n_marks() == marks.size() && spec.n_marks == marks.size(),
          Status::Invalid, "trend/spec/mark count mismatch");
  const double bound = local_stability_log_bound(trend, spec, strengths);
  require(std::isfinite(bound), Status::Unstable,
          "refusing to sample a locally unstable specification "
          "(infinite conditional-intensity bound)");

  Rng rng(config.seed);
  WindowSampler sampler(window);
  const int M = marks.size();
  const double area = window.area();
  const double shift_scale = config.shift_scale > 0.0
                                 ? config.shift_scale
                                 : 0.02 * window.diameter();

  // initial state: hardcore-thinned Poisson draw from the trend
  ChainState state(window, spec.max_interaction_distance());
  {
    const MarkedPointPattern init = sample_poisson(window, marks, trend, rng);
    for (std::size_t i = 0; i < init.size(); ++i) {
      const auto stats =
          state.stats(init.points[i], init.marks[i], spec, -1);
      if (stats.hardcore_violated) continue;
      state.insert(init.points[i], init.marks[i]);
    }
  }

  double cumulative_log_density = 0.0;
  if (trace) trace->clear();
  for (long step = 1; step <= config.steps; ++step) {
    const double move = rng.uniform();
    if (move < config.p_birth) {
      const Point2 u = sampler.draw(rng);
      const int m = static_cast<int>(rng.index(M));
      const double log_lambda =
          state_log_lambda(state, u, m, trend, spec, strengths, -1);
      if (std::isfinite(log_lambda)) {
        const double ratio = std::exp(log_lambda) * area * M * config.p_death /
                             ((static_cast<double>(state.size()) + 1.0) *
                              config.p_birth);
        if (rng.uniform() < ratio) {
          state.insert(u, m);
          cumulative_log_density += log_lambda;
        }
      }
    } else if (move < config.p_birth + config.p_death) {
      if (state.size() > 0) {
        const std::size_t idx = rng.index(state.size());
        const double log_lambda = state_log_lambda(
            state, state.point(idx), state.mark(idx), trend, spec, strengths,
            static_cast<long>(idx));
        bool accept = true;
        if (std::isfinite(log_lambda)) {
          const double ratio =
              static_cast<double>(state.size()) * config.p_birth /
              (std::exp(log_lambda) * area * M * config.p_death);
          accept = rng.uniform() < ratio;
        }
        if (accept) {
          cumulative_log_density -=
              std::isfinite(log_lambda) ? log_lambda : 0.0;
          state.remove(idx);
        }
      }
    } else {
      if (state.size() > 0) {
        const std::size_t idx = rng.index(state.size());
        const Point2 from = state.point(idx);
        const Point2 to{from.x + shift_scale * rng.normal(),
                        from.y + shift_scale * rng.normal()};
        if (window.contains(to)) {
          const int m = state.mark(idx);
          const long excl = static_cast<long>(idx);
          const double log_new =
              state_log_lambda(state, to, m, trend, spec, strengths, excl);
          const double log_old =
              state_log_lambda(state, from, m, trend, spec, strengths, excl);
          bool accept;
          if (!std::isfinite(log_new)) {
            accept = false;
          } else if (!std::isfinite(log_old)) {
            accept = true;
          } else {
            accept = rng.uniform() < std::exp(log_new - log_old);
          }
          if (accept) {
            state.remove(idx);
            state.insert(to, m);
            if (std::isfinite(log_new) && std::isfinite(log_old))
              cumulative_log_density += log_new - log_old;
          }
        }
      }
    }
    if (trace && trace_every > 0 && step % trace_every == 0)
      trace->push_back({step, state.size(), cumulative_log_density});
  }

  MarkedPointPattern out;
  out.id = "sim";
  out.window = window;
  out.points.assign(state.points().begin(), state.points().end());
  out.marks.assign(state.marks().begin(), state.marks().end());
  return out;
}

Cohort simulate_cohort(
    const GeneratingModel& model, int n_patients,
    const std::function<std::optional<ClinicalCovariates>(int)>& covariates,
    const SimulationConfig& config, int threads) {
  require(n_patients >= 1, Status::Invalid, "cohort size must be positive");
  Cohort cohort;
  cohort.marks = model.marks;
  cohort.patients.resize(n_patients);
  parallel_for(static_cast<std::size_t>(n_patients), threads, [&](std::size_t ki) {
    const int k = static_cast<int>(ki);
    std::optional<ClinicalCovariates> z =
        covariates ? covariates(k) : std::nullopt;
    double factor = 1.0;
    if (z && !model.covariate_coefficients.empty()) {
      const auto encoded = z->encode();
      require(model.covariate_coefficients.size() == encoded.size(),
              Status::Invalid, "covariate coefficient vector must have 13 slots");
      double dot = 0.0;
      for (std::size_t i = 0; i < encoded.size(); ++i)
        dot += model.covariate_coefficients[i] * encoded[i];
      factor = std::exp(dot);
    }
    SimulationConfig chain = config;
    chain.seed = Rng::derive(config.seed, static_cast<std::uint64_t>(k));
    PatientRecord record;
    record.pattern = mh_sample(model.window, model.marks,
                               model.trend.scaled(factor), model.spec,
                               model.strengths, chain);
    record.pattern.id = "sim_" + std::to_string(k);
    record.covariates = z;
    cohort.patients[k] = std::move(record);
  });
  return cohort;
}

}  // namespace mtg
