#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>

#include "intensity.hpp"
#include "interactions.hpp"

namespace mtg {

// One marked quadrature point of the Berman-Turner scheme.
struct QuadPoint {
  Point2 u;
  int mark = 0;
  double w = 0.0;      // quadrature weight (µm²)
  bool is_data = false;
  long data_index = -1;  // index into the fitted pattern when is_data
};

struct QuadratureScheme {
  std::vector<QuadPoint> points;
  std::shared_ptr<const TileGrid> grid;  // tiling of the integration domain
  double domain_area = 0.0;
  std::vector<double> weight_sum_by_mark;
};

// Counting weights: dummy points at tile representatives for every mark, each
// tile's clipped area shared equally among the quadrature points of a mark in
// it. Data points outside the domain are left to the interaction statistics.
QuadratureScheme make_quadrature(const MarkedPointPattern& pattern,
                                 const PolygonalWindow& domain, int nx, int ny,
                                 int n_marks);

struct FitOptions {
  int fit_grid = 128;     // offset / integral grid resolution
  int dummy_grid = 0;     // 0 = automatic (>= 64, >= sqrt(4 n_m))
  double border = -1.0;   // < 0 = max interaction distance of the spec
  double bandwidth = 0.0; // 0 = Scott's rule per mark
  bool use_offset = true;
  bool use_covariates = true;
  std::vector<std::string> covariate_subset;  // empty = all clinical covariates
  int threads = 1;
};

// Regular-parameter column layout: per-mark intercepts, clinical covariates,
// interaction strengths.
struct ColumnLayout {
  std::vector<std::string> names;
  int n_marks = 0;
  int n_covariates = 0;
  int n_strengths = 0;
  std::vector<int> covariate_slots;  // indexes into ClinicalCovariates::encode()

  int columns() const { return n_marks + n_covariates + n_strengths; }
  int intercept_col(int mark) const { return mark; }
  int covariate_col(int k) const { return n_marks + k; }
  int strength_col(int k) const { return n_marks + n_covariates + k; }
};

ColumnLayout make_layout(const MarkSet& marks, const InteractionSpec& spec,
                         const std::vector<std::string>& covariate_subset,
                         bool with_covariates);

// GLM rows of one patient after dropping hardcore-excluded dummies.
struct DesignBlock {
  Eigen::MatrixXd x;
  Eigen::VectorXd response;  // υ = z / w
  Eigen::VectorXd weight;    // w
  Eigen::VectorXd offset;    // log B_• (zeros when the offset is disabled)
  std::vector<std::uint8_t> is_data;
  long excluded_dummies = 0;
};

DesignBlock build_rows(const QuadratureScheme& quad,
                       const IntensitySurface* offset_surface,
                       const std::optional<ClinicalCovariates>& covariates,
                       const InteractionSpec& spec,
                       const MarkedPointPattern& pattern,
                       const ColumnLayout& layout);

struct GlmResult {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  std::vector<double> std_errors;
  std::vector<double> p_values;
  double log_pl = 0.0;
  double deviance = 0.0;
  int iterations = 0;
};

// Weighted Poisson IRLS with log link and offset; standard errors from the
// inverse Fisher information of the surrogate.
GlmResult irls_fit(std::span<const DesignBlock> blocks,
                   const std::vector<std::string>& column_names);

// The quadrature objective Σ (υ log λ - λ) w evaluated directly at beta.
double quadrature_log_pl(std::span<const DesignBlock> blocks,
                         const Eigen::VectorXd& beta);

// Everything that can be reused across interaction specs sharing one border:
// restricted patterns, offset surfaces, eroded domains, quadrature schemes.
struct FitContext {
  MarkSet marks;
  FitOptions options;
  double border = 0.0;
  bool have_covariates = false;
  std::vector<MarkedPointPattern> patterns;
  std::vector<std::optional<ClinicalCovariates>> covariates;
  std::vector<std::shared_ptr<const TileGrid>> fit_grids;
  std::vector<IntensitySurface> offsets;  // B_• per patient when use_offset
  std::vector<PolygonalWindow> domains;
  std::vector<QuadratureScheme> quadratures;
};

std::shared_ptr<const FitContext> prepare_fit(const Cohort& cohort,
                                              const FitOptions& options,
                                              double border);

struct CoefficientEntry {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double p_value = 0.0;
};

struct FittedModel {
  std::string label;
  MarkSet marks;
  InteractionSpec spec;
  bool use_offset = true;
  bool use_covariates = true;
  ColumnLayout layout;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  std::vector<CoefficientEntry> table;
  double log_pl = 0.0;
  long excluded_dummies = 0;
  FitOptions refit_options;  // echo of the options the fit ran with
  double border = 0.0;       // resolved integration border
  std::shared_ptr<const FitContext> context;

  double strength(int mark_i, int mark_j) const;
  double covariate_effect(const std::optional<ClinicalCovariates>& c) const;
  const CoefficientEntry* find(const std::string& name) const;
};

// First-order usage may be narrowed per fit (offset and covariates off) so a
// shared context can serve a whole model menu.
FittedModel fit_with_context(std::shared_ptr<const FitContext> context,
                             const InteractionSpec& spec, bool use_offset,
                             bool use_covariates);
FittedModel fit_with_context(std::shared_ptr<const FitContext> context,
                             const InteractionSpec& spec);
FittedModel fit_cohort(const Cohort& cohort, const InteractionSpec& spec,
                       const FitOptions& options);

// Conditional intensity of a fitted model for one patient of its context.
class ModelEvaluator {
 public:
  ModelEvaluator(const FittedModel& model, std::size_t patient);

  // log λ((u, mark) | X); -inf under a hardcore violation.
  double log_conditional_intensity(Point2 u, int mark,
                                   long exclude_index = -1) const;
  double conditional_intensity(Point2 u, int mark, long exclude_index = -1) const;

  const MarkedPointPattern& pattern() const { return *pattern_; }
  const PolygonalWindow& domain() const;
  std::size_t patient_index() const { return patient_; }

 private:
  const FittedModel* model_;
  std::size_t patient_;
  const MarkedPointPattern* pattern_;
  PatternNeighborhood neighborhood_;
  double patient_scalar_ = 0.0;  // covariate contribution η̂ᵀZ
};

IntensitySurface conditional_intensity_surface(
    const FittedModel& model, std::size_t patient, int mark,
    std::shared_ptr<const TileGrid> grid);

struct ProfileTraceEntry {
  int sweep = 0;
  int mark_i = 0, mark_j = 0;
  double range = 0.0, rate = 0.0;
  double log_pl = 0.0;  // -inf when the inner fit failed
  bool accepted = false;
};

struct ProfileResult {
  PairMatrix range;
  PairMatrix rate;
  double best_log_pl = 0.0;
  std::vector<ProfileTraceEntry> trace;
};

// Coordinate ascent over unordered pairs: each pair scans the (R, gamma) grid
// holding the others fixed; repeats until stable or five sweeps. The border is
// held at the largest grid range so all evaluations share one domain.
ProfileResult profile_pl(const Cohort& cohort, InteractionKind kind,
                         const PairMatrix& hardcore,
                         std::span<const double> range_grid,
                         std::span<const double> rate_grid,
                         const FitOptions& options);

}  // namespace mtg
