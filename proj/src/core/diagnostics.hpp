#pragma once

#include "fitting.hpp"

namespace mtg {

enum class ResidualKind { Raw, Pearson, Inverse };

const char* residual_kind_name(ResidualKind kind);
ResidualKind parse_residual_kind(const std::string& name);

// Residual measure of one patient and mark over the region tiled by `grid`
// (normally the model's integration domain): per-tile data sums minus the
// tile integrals of the fitted conditional intensity. Pearson and inverse
// kinds reject models assigning zero intensity to an observed point.
std::vector<double> residual_field(const ModelEvaluator& evaluator, int mark,
                                   ResidualKind kind, const TileGrid& grid);
double residual_total(const ModelEvaluator& evaluator, int mark,
                      ResidualKind kind, const TileGrid& grid);

// sqrt of the mean squared per-patient total.
double rmse_of_totals(std::span<const double> totals);

// The eight-model comparison menu; irregulars come from the hardcore
// estimator and the profile step.
struct ModelMenuEntry {
  std::string label;
  InteractionKind kind;
  bool use_offset;
  bool use_covariates;
};

const std::vector<ModelMenuEntry>& model_menu();
const ModelMenuEntry& menu_entry(const std::string& label);

// Interaction spec for a menu entry given the estimated irregulars.
InteractionSpec menu_spec(const ModelMenuEntry& entry, const PairMatrix& hardcore,
                          const PairMatrix& range, const PairMatrix& rate);

}  // namespace mtg
