#include "diagnostics.hpp"

#include <cmath>

namespace mtg {

const char* residual_kind_name(ResidualKind kind) {
  switch (kind) {
    case ResidualKind::Raw: return "raw";
    case ResidualKind::Pearson: return "pearson";
    case ResidualKind::Inverse: return "inverse";
  }
  return "?";
}

ResidualKind parse_residual_kind(const std::string& name) {
  for (ResidualKind k :
       {ResidualKind::Raw, ResidualKind::Pearson, ResidualKind::Inverse})
    if (name == residual_kind_name(k)) return k;
  fail(Status::Schema, "unknown residual kind '" + name + "'");
}

std::vector<double> residual_field(const ModelEvaluator& evaluator, int mark,
                                   ResidualKind kind, const TileGrid& grid) {
  std::vector<double> field(grid.n_cells(), 0.0);

  // integral term at tile representatives
  for (std::size_t c = 0; c < grid.n_cells(); ++c) {
    const double area = grid.tile_area(c);
    if (area <= 0.0) continue;
    const double lambda = evaluator.conditional_intensity(grid.representative(c), mark);
    double integrand = 0.0;
    switch (kind) {
      case ResidualKind::Raw: integrand = lambda; break;
      case ResidualKind::Pearson: integrand = std::sqrt(lambda); break;
      case ResidualKind::Inverse: integrand = lambda > 0.0 ? 1.0 : 0.0; break;
    }
    field[c] -= integrand * area;
  }

  // data term over points of the mark inside the tiled region
  const auto& pattern = evaluator.pattern();
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern.marks[i] != mark) continue;
    if (!grid.window().contains(pattern.points[i])) continue;
    const auto cell = grid.cell_index(pattern.points[i]);
    if (!cell || grid.tile_area(*cell) <= 0.0) continue;
    const double lambda = evaluator.conditional_intensity(
        pattern.points[i], mark, static_cast<long>(i));
    switch (kind) {
      case ResidualKind::Raw:
        field[*cell] += 1.0;
        break;
      case ResidualKind::Pearson:
        require(lambda > 0.0, Status::Degenerate,
                "degenerate model: zero fitted intensity at a data point of "
                "pattern '" + pattern.id + "'");
        field[*cell] += 1.0 / std::sqrt(lambda);
        break;
      case ResidualKind::Inverse:
        require(lambda > 0.0, Status::Degenerate,
                "degenerate model: zero fitted intensity at a data point of "
                "pattern '" + pattern.id + "'");
        field[*cell] += 1.0 / lambda;
        break;
    }
  }
  return field;
}

double residual_total(const ModelEvaluator& evaluator, int mark,
                      ResidualKind kind, const TileGrid& grid) {
  double total = 0.0;
  for (double v : residual_field(evaluator, mark, kind, grid)) total += v;
  return total;
}

double rmse_of_totals(std::span<const double> totals) {
  require(!totals.empty(), Status::Invalid, "RMSE of an empty set of totals");
  double acc = 0.0;
  for (double t : totals) acc += t * t;
  return std::sqrt(acc / static_cast<double>(totals.size()));
}

const std::vector<ModelMenuEntry>& model_menu() {
  static const std::vector<ModelMenuEntry> menu{
      {"fiksel1", InteractionKind::Fiksel, true, true},
      {"fiksel2", InteractionKind::Fiksel, false, false},
      {"fiksel3", InteractionKind::Fiksel, false, true},
      {"fiksel4", InteractionKind::FikselWithinOnly, true, true},
      {"strauss", InteractionKind::Strauss, true, true},
      {"hardcore", InteractionKind::Hardcore, true, true},
      {"strausshardcore", InteractionKind::StraussHardcore, true, true},
      {"poisson", InteractionKind::None, true, true},
  };
  return menu;
}

const ModelMenuEntry& menu_entry(const std::string& label) {
  for (const auto& entry : model_menu())
    if (entry.label == label) return entry;
  fail(Status::Schema, "unknown model label '" + label + "'");
}

InteractionSpec menu_spec(const ModelMenuEntry& entry, const PairMatrix& hardcore,
                          const PairMatrix& range, const PairMatrix& rate) {
  switch (entry.kind) {
    case InteractionKind::None:
      return InteractionSpec::none(hardcore.size());
    case InteractionKind::Fiksel:
      return InteractionSpec::fiksel(hardcore, range, rate, false);
    case InteractionKind::FikselWithinOnly:
      return InteractionSpec::fiksel(hardcore, range, rate, true);
    case InteractionKind::Strauss:
      return InteractionSpec::strauss(range);
    case InteractionKind::Hardcore:
      // the exclusion distance of the pure hardcore model is the estimated
      // hardcore matrix
      return InteractionSpec::hardcore_model(hardcore);
    case InteractionKind::StraussHardcore:
      return InteractionSpec::strauss_hardcore(hardcore, range);
  }
  fail(Status::Internal, "unhandled menu entry");
}

}  // namespace mtg
