#include "fitting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parallel.hpp"

namespace mtg {

namespace {

double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double log_floored(double v) { return std::log(std::max(v, kIntensityFloor)); }

}  // namespace

QuadratureScheme make_quadrature(const MarkedPointPattern& pattern,
                                 const PolygonalWindow& domain, int nx, int ny,
                                 int n_marks) {
  require(nx >= 1 && ny >= 1, Status::Invalid, "quadrature grid must be positive");
  QuadratureScheme scheme;
  scheme.grid = std::make_shared<TileGrid>(domain, nx, ny);
  scheme.domain_area = domain.area();
  const TileGrid& grid = *scheme.grid;
  const std::size_t n_cells = grid.n_cells();

  // data points inside the domain, bucketed by (cell, mark)
  std::vector<std::vector<std::pair<long, int>>> data_in_cell(n_cells);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (!domain.contains(pattern.points[i])) continue;
    const auto cell = grid.cell_index(pattern.points[i]);
    require(cell.has_value() && grid.tile_area(*cell) > 0.0, Status::Internal,
            "data point fell into a zero-area quadrature tile");
    data_in_cell[*cell].emplace_back(static_cast<long>(i), pattern.marks[i]);
  }

  scheme.weight_sum_by_mark.assign(n_marks, 0.0);
  for (std::size_t c = 0; c < n_cells; ++c) {
    const double area = grid.tile_area(c);
    if (area <= 0.0) {
      require(data_in_cell[c].empty(), Status::Internal,
              "data point fell into a zero-area quadrature tile");
      continue;
    }
    for (int m = 0; m < n_marks; ++m) {
      std::size_t count = 1;  // the dummy point
      for (const auto& [idx, mark] : data_in_cell[c])
        if (mark == m) ++count;
      const double w = area / static_cast<double>(count);
      scheme.points.push_back({grid.representative(c), m, w, false, -1});
      for (const auto& [idx, mark] : data_in_cell[c])
        if (mark == m)
          scheme.points.push_back({pattern.points[idx], m, w, true, idx});
      scheme.weight_sum_by_mark[m] += w * static_cast<double>(count);
    }
  }
  for (int m = 0; m < n_marks; ++m)
    require(std::abs(scheme.weight_sum_by_mark[m] - scheme.domain_area) <=
                1e-6 * scheme.domain_area,
            Status::Internal, "quadrature weights do not sum to the domain area");
  return scheme;
}

ColumnLayout make_layout(const MarkSet& marks, const InteractionSpec& spec,
                         const std::vector<std::string>& covariate_subset,
                         bool with_covariates) {
  ColumnLayout layout;
  layout.n_marks = marks.size();
  for (int m = 0; m < marks.size(); ++m)
    layout.names.push_back("intercept[" + marks.label(m) + "]");

  if (with_covariates) {
    const auto& all = ClinicalCovariates::covariate_names();
    std::vector<std::string> wanted =
        covariate_subset.empty() ? all : covariate_subset;
    for (const auto& name : wanted) {
      const auto it = std::find(all.begin(), all.end(), name);
      require(it != all.end(), Status::Schema,
              "unknown covariate '" + name + "'");
      layout.covariate_slots.push_back(static_cast<int>(it - all.begin()));
      layout.names.push_back(name);
    }
    layout.n_covariates = static_cast<int>(layout.covariate_slots.size());
  }

  for (const auto& name : spec.coefficient_names(marks)) layout.names.push_back(name);
  layout.n_strengths = spec.n_coefficients();
  return layout;
}

DesignBlock build_rows(const QuadratureScheme& quad,
                       const IntensitySurface* offset_surface,
                       const std::optional<ClinicalCovariates>& covariates,
                       const InteractionSpec& spec,
                       const MarkedPointPattern& pattern,
                       const ColumnLayout& layout) {
  std::vector<double> cov_values;
  if (layout.n_covariates > 0) {
    require(covariates.has_value(), Status::Schema,
            "pattern '" + pattern.id + "' has no clinical covariates");
    const auto encoded = covariates->encode();
    for (int slot : layout.covariate_slots) cov_values.push_back(encoded[slot]);
  }

  PatternNeighborhood neighborhood(pattern, spec.max_interaction_distance());
  const int p = layout.columns();
  std::vector<double> xs;
  std::vector<double> ys, ws, offs;
  std::vector<std::uint8_t> data_flags;
  xs.reserve(quad.points.size() * p);
  DesignBlock block;

  for (const auto& qp : quad.points) {
    const auto stats = neighborhood.stats(qp.u, qp.mark, spec,
                                          qp.is_data ? qp.data_index : -1);
    if (stats.hardcore_violated) {
      require(!qp.is_data, Status::Invalid,
              "inconsistent hardcore: data point of pattern '" + pattern.id +
                  "' violates the hardcore distances");
      ++block.excluded_dummies;
      continue;
    }
    for (int m = 0; m < layout.n_marks; ++m) xs.push_back(m == qp.mark ? 1.0 : 0.0);
    for (int k = 0; k < layout.n_covariates; ++k) xs.push_back(cov_values[k]);
    for (int k = 0; k < layout.n_strengths; ++k) xs.push_back(stats.values[k]);
    ys.push_back(qp.is_data ? 1.0 / qp.w : 0.0);
    ws.push_back(qp.w);
    offs.push_back(offset_surface ? log_floored(offset_surface->value_at(qp.u))
                                  : 0.0);
    data_flags.push_back(qp.is_data ? 1 : 0);
  }

  const long n = static_cast<long>(ys.size());
  block.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>(xs.data(), n, p);
  block.response = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  block.weight = Eigen::Map<Eigen::VectorXd>(ws.data(), n);
  block.offset = Eigen::Map<Eigen::VectorXd>(offs.data(), n);
  block.is_data = std::move(data_flags);
  return block;
}

namespace {

double block_deviance(const DesignBlock& b, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = b.offset + b.x * beta;
  double dev = 0.0;
  for (long i = 0; i < eta.size(); ++i) {
    const double mu = std::exp(eta[i]);
    const double y = b.response[i];
    double term = -(y - mu);
    if (y > 0.0) term += y * std::log(y / mu);
    dev += 2.0 * b.weight[i] * term;
  }
  return dev;
}

double block_log_pl(const DesignBlock& b, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = b.offset + b.x * beta;
  double acc = 0.0;
  for (long i = 0; i < eta.size(); ++i) {
    const double mu = std::exp(eta[i]);
    const double y = b.response[i];
    acc += b.weight[i] * ((y > 0.0 ? y * eta[i] : 0.0) - mu);
  }
  return acc;
}

// log-pseudolikelihood of the saturated weighted Poisson model
double block_saturated(const DesignBlock& b) {
  double acc = 0.0;
  for (long i = 0; i < b.response.size(); ++i) {
    const double y = b.response[i];
    if (y > 0.0) acc += b.weight[i] * (y * std::log(y) - y);
  }
  return acc;
}

}  // namespace

double quadrature_log_pl(std::span<const DesignBlock> blocks,
                         const Eigen::VectorXd& beta) {
  double acc = 0.0;
  for (const auto& b : blocks) acc += block_log_pl(b, beta);
  return acc;
}

GlmResult irls_fit(std::span<const DesignBlock> blocks,
                   const std::vector<std::string>& column_names) {
  require(!blocks.empty(), Status::Invalid, "no design rows to fit");
  const int p = static_cast<int>(blocks.front().x.cols());
  long n_rows = 0;
  for (const auto& b : blocks) n_rows += b.x.rows();
  require(n_rows >= p, Status::Singular, "fewer rows than coefficients");

  // aliasing check on the prior-weighted Gram matrix
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  for (const auto& b : blocks)
    gram.noalias() += b.x.transpose() * b.weight.asDiagonal() * b.x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double max_eig = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-10 * max_eig) {
    const Eigen::VectorXd null_vec = es.eigenvectors().col(0);
    const double top = null_vec.cwiseAbs().maxCoeff();
    std::ostringstream msg;
    msg << "singular design; aliased columns:";
    for (int j = 0; j < p; ++j)
      if (std::abs(null_vec[j]) >= 0.1 * top) msg << ' ' << column_names.at(j);
    fail(Status::Singular, msg.str());
  }

  auto deviance_at = [&](const Eigen::VectorXd& beta) {
    double dev = 0.0;
    for (const auto& b : blocks) dev += block_deviance(b, beta);
    return dev;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double dev = deviance_at(beta);
  require(std::isfinite(dev), Status::NonConvergence,
          "initial deviance is not finite");

  GlmResult result;
  bool converged = false;
  std::vector<double> dev_trace{dev};
  for (int iter = 1; iter <= 100; ++iter) {
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    for (const auto& b : blocks) {
      const Eigen::VectorXd eta = b.offset + b.x * beta;
      const Eigen::VectorXd mu = eta.array().exp();
      const Eigen::VectorXd wm = b.weight.cwiseProduct(mu);
      const Eigen::VectorXd z =
          (eta - b.offset) + (b.response - mu).cwiseQuotient(mu);
      info.noalias() += b.x.transpose() * wm.asDiagonal() * b.x;
      rhs.noalias() += b.x.transpose() * wm.cwiseProduct(z);
    }
    const Eigen::VectorXd proposal = info.ldlt().solve(rhs);

    double step = 1.0;
    Eigen::VectorXd beta_next = beta;
    double dev_next = dev;
    while (true) {
      const Eigen::VectorXd candidate = beta + step * (proposal - beta);
      const double dev_candidate = deviance_at(candidate);
      if (std::isfinite(dev_candidate) &&
          dev_candidate <= dev + 1e-8 * (std::abs(dev) + 1.0)) {
        beta_next = candidate;
        dev_next = dev_candidate;
        break;
      }
      step *= 0.5;
      if (step < 1e-12) break;
    }

    const double rel = std::abs(dev - dev_next) / (std::abs(dev_next) + 0.1);
    beta = beta_next;
    dev = dev_next;
    dev_trace.push_back(dev);
    result.iterations = iter;
    if (rel < 1e-8) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "IRLS did not converge in 100 iterations; deviance trace (tail):";
    const std::size_t from = dev_trace.size() > 5 ? dev_trace.size() - 5 : 0;
    for (std::size_t i = from; i < dev_trace.size(); ++i) msg << ' ' << dev_trace[i];
    fail(Status::NonConvergence, msg.str());
  }

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
  for (const auto& b : blocks) {
    const Eigen::VectorXd eta = b.offset + b.x * beta;
    const Eigen::VectorXd wm = b.weight.cwiseProduct(eta.array().exp().matrix());
    info.noalias() += b.x.transpose() * wm.asDiagonal() * b.x;
  }
  result.coefficients = beta;
  result.covariance = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  result.std_errors.resize(p);
  result.p_values.resize(p);
  for (int j = 0; j < p; ++j) {
    result.std_errors[j] = std::sqrt(std::max(result.covariance(j, j), 0.0));
    const double z = result.std_errors[j] > 0
                         ? beta[j] / result.std_errors[j]
                         : std::numeric_limits<double>::infinity();
    result.p_values[j] = normal_two_sided_p(z);
  }
  result.deviance = dev;
  // deviance route to the maximized objective; quadrature_log_pl provides the
  // independent direct evaluation of the same quantity
  double saturated = 0.0;
  for (const auto& b : blocks) saturated += block_saturated(b);
  result.log_pl = saturated - 0.5 * dev;
  return result;
}

std::shared_ptr<const FitContext> prepare_fit(const Cohort& cohort,
                                              const FitOptions& options,
                                              double border) {
  cohort.validate();
  require(border >= 0.0, Status::Invalid, "border margin must be nonnegative");
  require(options.fit_grid >= 8, Status::Invalid, "fit grid too coarse");

  auto ctx = std::make_shared<FitContext>();
  ctx->marks = cohort.marks;
  ctx->options = options;
  ctx->border = border;

  bool any_cov = false, all_cov = true;
  for (const auto& patient : cohort.patients) {
    any_cov = any_cov || patient.covariates.has_value();
    all_cov = all_cov && patient.covariates.has_value();
  }
  if (options.use_covariates && any_cov)
    require(all_cov, Status::Schema,
            "covariates must be present for every patient or none");
  ctx->have_covariates = options.use_covariates && any_cov && all_cov;

  const std::size_t g = cohort.size();
  ctx->patterns.resize(g);
  ctx->covariates.resize(g);
  ctx->fit_grids.resize(g);
  ctx->offsets.resize(g);
  ctx->domains.resize(g);
  ctx->quadratures.resize(g);

  const int M = cohort.marks.size();
  parallel_for(g, options.threads, [&](std::size_t k) {
    const auto& patient = cohort.patients[k];
    MarkedPointPattern pattern =
        cohort.common_window
            ? restrict_pattern(patient.pattern, *cohort.common_window)
            : patient.pattern;
    ctx->covariates[k] = patient.covariates;

    auto grid = std::make_shared<TileGrid>(pattern.window, options.fit_grid,
                                           options.fit_grid);
    if (options.use_offset) {
      std::vector<IntensitySurface> per_mark;
      for (int m = 0; m < M; ++m) {
        const double h0 = options.bandwidth > 0.0 ? options.bandwidth
                                                  : scott_bandwidth(pattern, m);
        std::vector<double> bw;
        if (!pattern.indices_of_mark(m).empty())
          bw = adaptive_bandwidths(pattern, m, h0);
        per_mark.push_back(estimate_intensity(pattern, m, bw, grid, h0));
      }
      ctx->offsets[k] = total_intensity(per_mark);
    }

    PolygonalWindow domain =
        border > 0.0 ? erode_border(pattern.window, border) : pattern.window;

    int side = options.dummy_grid;
    if (side <= 0) {
      std::size_t max_count = 0;
      std::vector<std::size_t> in_domain(M, 0);
      for (std::size_t i = 0; i < pattern.size(); ++i)
        if (domain.contains(pattern.points[i])) ++in_domain[pattern.marks[i]];
      for (int m = 0; m < M; ++m) max_count = std::max(max_count, in_domain[m]);
      side = std::max<int>(
          64, static_cast<int>(std::ceil(std::sqrt(4.0 * max_count))));
    }
    ctx->quadratures[k] = make_quadrature(pattern, domain, side, side, M);
    ctx->domains[k] = std::move(domain);
    ctx->fit_grids[k] = std::move(grid);
    ctx->patterns[k] = std::move(pattern);
  });
  return ctx;
}

FittedModel fit_with_context(std::shared_ptr<const FitContext> context,
                             const InteractionSpec& spec, bool use_offset,
                             bool use_covariates) {
  require(context != nullptr, Status::Invalid, "missing fit context");
  require(spec.n_marks == context->marks.size(), Status::Invalid,
          "interaction spec mark count does not match the cohort");
  require(!use_offset || context->options.use_offset, Status::Invalid,
          "context was prepared without offset surfaces");
  spec.validate();

  const ColumnLayout layout =
      make_layout(context->marks, spec, context->options.covariate_subset,
                  use_covariates && context->have_covariates);

  std::vector<DesignBlock> blocks(context->patterns.size());
  parallel_for(blocks.size(), context->options.threads, [&](std::size_t k) {
    blocks[k] = build_rows(context->quadratures[k],
                           use_offset ? &context->offsets[k] : nullptr,
                           context->covariates[k], spec, context->patterns[k],
                           layout);
  });

  GlmResult glm = irls_fit(blocks, layout.names);

  FittedModel model;
  model.marks = context->marks;
  model.spec = spec;
  model.use_offset = use_offset;
  model.use_covariates = use_covariates && context->have_covariates;
  model.refit_options = context->options;
  model.refit_options.use_offset = use_offset;
  model.refit_options.use_covariates = model.use_covariates;
  model.border = context->border;
  model.layout = layout;
  model.coefficients = glm.coefficients;
  model.covariance = glm.covariance;
  model.log_pl = glm.log_pl;
  model.context = std::move(context);
  for (const auto& b : blocks) model.excluded_dummies += b.excluded_dummies;
  for (int j = 0; j < layout.columns(); ++j)
    model.table.push_back({layout.names[j], glm.coefficients[j],
                           glm.std_errors[j], glm.p_values[j]});
  return model;
}

FittedModel fit_with_context(std::shared_ptr<const FitContext> context,
                             const InteractionSpec& spec) {
  const bool use_offset = context->options.use_offset;
  const bool use_covariates = context->options.use_covariates;
  return fit_with_context(std::move(context), spec, use_offset, use_covariates);
}

FittedModel fit_cohort(const Cohort& cohort, const InteractionSpec& spec,
                       const FitOptions& options) {
  const double border =
      options.border >= 0.0 ? options.border : spec.max_interaction_distance();
  return fit_with_context(prepare_fit(cohort, options, border), spec);
}

double FittedModel::strength(int mark_i, int mark_j) const {
  const int idx = spec.coefficient_index(mark_i, mark_j);
  return idx < 0 ? 0.0 : coefficients[layout.strength_col(idx)];
}

double FittedModel::covariate_effect(
    const std::optional<ClinicalCovariates>& c) const {
  if (layout.n_covariates == 0) return 0.0;
  require(c.has_value(), Status::Invalid,
          "model uses covariates but the patient has none");
  const auto encoded = c->encode();
  double acc = 0.0;
  for (int k = 0; k < layout.n_covariates; ++k)
    acc += coefficients[layout.covariate_col(k)] *
           encoded[layout.covariate_slots[k]];
  return acc;
}

const CoefficientEntry* FittedModel::find(const std::string& name) const {
  for (const auto& entry : table)
    if (entry.name == name) return &entry;
  return nullptr;
}

ModelEvaluator::ModelEvaluator(const FittedModel& model, std::size_t patient)
    : model_(&model),
      patient_(patient),
      pattern_(&model.context->patterns.at(patient)),
      neighborhood_(*pattern_, model.spec.max_interaction_distance()),
      patient_scalar_(model.covariate_effect(model.context->covariates.at(patient))) {}

const PolygonalWindow& ModelEvaluator::domain() const {
  return model_->context->domains.at(patient_);
}

double ModelEvaluator::log_conditional_intensity(Point2 u, int mark,
                                                 long exclude_index) const {
  const auto stats = neighborhood_.stats(u, mark, model_->spec, exclude_index);
  if (stats.hardcore_violated) return kNegInf;
  double eta = model_->coefficients[model_->layout.intercept_col(mark)] +
               patient_scalar_;
  if (model_->use_offset)
    eta += log_floored(model_->context->offsets.at(patient_).value_at(u));
  for (std::size_t k = 0; k < stats.values.size(); ++k)
    eta += model_->coefficients[model_->layout.strength_col(static_cast<int>(k))] *
           stats.values[k];
  return eta;
}

double ModelEvaluator::conditional_intensity(Point2 u, int mark,
                                             long exclude_index) const {
  const double log_lambda = log_conditional_intensity(u, mark, exclude_index);
  return std::isfinite(log_lambda) ? std::exp(log_lambda) : 0.0;
}

IntensitySurface conditional_intensity_surface(
    const FittedModel& model, std::size_t patient, int mark,
    std::shared_ptr<const TileGrid> grid) {
  require(grid != nullptr, Status::Invalid, "missing evaluation grid");
  ModelEvaluator eval(model, patient);
  std::vector<double> values(grid->n_cells(), 0.0);
  for (std::size_t c = 0; c < grid->n_cells(); ++c) {
    if (grid->tile_area(c) <= 0.0) continue;
    values[c] = eval.conditional_intensity(grid->representative(c), mark);
  }
  return IntensitySurface(std::move(grid), std::move(values),
                          "lambda[" + model.marks.label(mark) + "]");
}

ProfileResult profile_pl(const Cohort& cohort, InteractionKind kind,
                         const PairMatrix& hardcore,
                         std::span<const double> range_grid,
                         std::span<const double> rate_grid,
                         const FitOptions& options) {
  require(!range_grid.empty(), Status::Invalid, "empty range grid");
  const bool uses_rate =
      kind == InteractionKind::Fiksel || kind == InteractionKind::FikselWithinOnly;
  std::vector<double> rates(rate_grid.begin(), rate_grid.end());
  if (!uses_rate || rates.empty()) rates = {0.0};

  const int M = cohort.marks.size();
  InteractionSpec probe;
  probe.kind = kind;
  probe.n_marks = M;
  const auto pairs = probe.coefficient_pairs();
  require(!pairs.empty(), Status::Invalid,
          "profiling needs an interaction with strength coefficients");

  const double max_range = *std::max_element(range_grid.begin(), range_grid.end());
  const double border = options.border >= 0.0 ? options.border : max_range;
  auto context = prepare_fit(cohort, options, border);

  PairMatrix range(M, range_grid.back());
  PairMatrix rate(M, rates[rates.size() / 2]);

  auto make_spec = [&](const PairMatrix& R, const PairMatrix& G) {
    switch (kind) {
      case InteractionKind::Fiksel:
        return InteractionSpec::fiksel(hardcore, R, G, false);
      case InteractionKind::FikselWithinOnly:
        return InteractionSpec::fiksel(hardcore, R, G, true);
      case InteractionKind::Strauss:
        return InteractionSpec::strauss(R);
      case InteractionKind::StraussHardcore:
        return InteractionSpec::strauss_hardcore(hardcore, R);
      default:
        fail(Status::Invalid, "unsupported interaction kind for profiling");
    }
  };

  ProfileResult result;
  double best_log_pl = kNegInf;
  for (int sweep = 1; sweep <= 5; ++sweep) {
    bool changed = false;
    for (const auto& [i, j] : pairs) {
      double pair_best = kNegInf;
      double best_range = range(i, j), best_rate = rate(i, j);
      std::size_t accepted_at = result.trace.size();
      for (const double candidate_range : range_grid) {
        for (const double candidate_rate : rates) {
          PairMatrix R = range, G = rate;
          R.set(i, j, candidate_range);
          G.set(i, j, candidate_rate);
          double log_pl = kNegInf;
          try {
            log_pl = fit_with_context(context, make_spec(R, G)).log_pl;
          } catch (const Error&) {
            // infeasible grid point (e.g. range below the hardcore) scores -inf
          }
          if (log_pl > pair_best) {
            pair_best = log_pl;
            best_range = candidate_range;
            best_rate = candidate_rate;
            accepted_at = result.trace.size();
          }
          result.trace.push_back(
              {sweep, i, j, candidate_range, candidate_rate, log_pl, false});
        }
      }
      require(std::isfinite(pair_best), Status::NonConvergence,
              "every grid point failed while profiling a pair");
      result.trace[accepted_at].accepted = true;
      if (best_range != range(i, j) || best_rate != rate(i, j)) changed = true;
      range.set(i, j, best_range);
      rate.set(i, j, best_rate);
      best_log_pl = pair_best;
    }
    if (!changed) break;
  }
  result.range = range;
  result.rate = rate;
  result.best_log_pl = best_log_pl;
  return result;
}

}  // namespace mtg
