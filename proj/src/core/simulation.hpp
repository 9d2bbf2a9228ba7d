#pragma once

#include <functional>
#include <optional>

#include "fitting.hpp"
#include "rng.hpp"

namespace mtg {

struct SimulationConfig {
  long steps = 200000;
  long burnin = 100000;
  double p_birth = 0.4;
  double p_death = 0.4;
  double p_shift = 0.2;
  double shift_scale = -1.0;  // < 0: 2% of the window diameter
  std::uint64_t seed = 1;

  void validate() const;
};

// Per-mark first-order trend: a constant level, optionally modulated by an
// intensity surface.
class Trend {
 public:
  static Trend constant(std::vector<double> levels);
  static Trend from_surfaces(std::vector<IntensitySurface> surfaces);

  int n_marks() const { return static_cast<int>(levels_.size()); }
  double value(Point2 u, int mark) const;
  double max_level(int mark) const;
  Trend scaled(double factor) const;

 private:
  std::vector<double> levels_;
  std::vector<IntensitySurface> surfaces_;  // empty, or one per mark
};

// λ((u, mark) | pattern) in the log-linear form, zero under hardcore
// violation. Shares the sufficient-statistic code with the fitting module.
double papangelou_ratio(Point2 u, int mark, const MarkedPointPattern& pattern,
                        const Trend& trend, const InteractionSpec& spec,
                        std::span<const double> strengths,
                        long exclude_index = -1);

// Conservative upper bound on log λ; infinite for locally unstable specs
// (attractive interactions with an unbounded neighbour count).
double local_stability_log_bound(const Trend& trend, const InteractionSpec& spec,
                                 std::span<const double> strengths);

struct TraceEntry {
  long step = 0;
  std::size_t n_points = 0;
  double cumulative_log_density = 0.0;
};

// Metropolis-Hastings birth/death/shift chain for the multitype Gibbs model on
// W (bounded-case semantics). Deterministic given the seed; refuses specs whose
// stability bound is infinite.
MarkedPointPattern mh_sample(const PolygonalWindow& window, const MarkSet& marks,
                             const Trend& trend, const InteractionSpec& spec,
                             std::span<const double> strengths,
                             const SimulationConfig& config,
                             std::vector<TraceEntry>* trace = nullptr,
                             long trace_every = 0);

// Poisson draw from the trend, thinned to satisfy hardcore constraints; used
// as the chain's initial state and as a direct CSR sampler in tests.
MarkedPointPattern sample_poisson(const PolygonalWindow& window,
                                  const MarkSet& marks, const Trend& trend,
                                  Rng& rng);

// A known model to simulate cohorts from; covariate coefficients follow the
// clinical-covariate encoding and enter the trend multiplicatively.
struct GeneratingModel {
  PolygonalWindow window;
  MarkSet marks;
  Trend trend;
  InteractionSpec spec;
  std::vector<double> strengths;
  std::vector<double> covariate_coefficients;  // 13 slots; empty = none
};

Cohort simulate_cohort(
    const GeneratingModel& model, int n_patients,
    const std::function<std::optional<ClinicalCovariates>(int)>& covariates,
    const SimulationConfig& config, int threads = 1);

}  // namespace mtg
