#pragma once

#include <json.hpp>

#include "diagnostics.hpp"
#include "simulation.hpp"
#include "summaries.hpp"

namespace mtg {

// Runtime configuration for the pipeline commands: one JSON document (flag
// overrides applied by the caller). Every output carries fnv1a64 of the
// canonical dump as its provenance hash.
struct RunConfig {
  nlohmann::json raw = nlohmann::json::object();
  std::uint64_t hash = 0;

  int grid = 128;
  int dummy = 0;           // 0 = automatic dummy density
  double border = -1.0;    // < 0 = automatic (max interaction distance)
  double bandwidth = 0.0;  // 0 = Scott's rule
  double max_range = -1.0; // < 0 = heuristic bound from the pooled L table
  int threads = 1;
  std::uint64_t seed = 1;
  bool shared_hardcore = false;
  bool residual_fields = false;
  std::vector<std::string> models{"fiksel1"};
  std::vector<std::string> covariate_subset;

  static RunConfig from_json(const nlohmann::json& doc);
  FitOptions fit_options() const;
};

nlohmann::json window_to_json(const PolygonalWindow& window);
PolygonalWindow window_from_json(const nlohmann::json& doc);

nlohmann::json pair_matrix_to_json(const PairMatrix& m);
PairMatrix pair_matrix_from_json(const nlohmann::json& doc);

// Persisted model: coefficient table, irregular matrices, config echo. The
// evaluation context is rebuilt against a cohort with attach_cohort.
nlohmann::json model_to_json(const FittedModel& model, std::uint64_t config_hash);
FittedModel model_from_json(const nlohmann::json& doc);
void attach_cohort(FittedModel& model, const Cohort& cohort);

std::string coefficient_table_csv(const FittedModel& model,
                                  std::uint64_t config_hash);

// Pipeline commands. Each writes its artifacts under out_dir and returns a
// machine-readable report.
nlohmann::json run_window(const Cohort& cohort, const RunConfig& config,
                          const std::string& out_dir);
nlohmann::json run_summaries(const Cohort& cohort, const RunConfig& config,
                             const std::string& out_dir);
nlohmann::json run_profile(const Cohort& cohort, const RunConfig& config,
                           const std::string& out_dir);
nlohmann::json run_fit(const Cohort& cohort, const RunConfig& config,
                       const std::string& out_dir);
nlohmann::json run_residuals(const Cohort& cohort,
                             std::vector<FittedModel> models,
                             const RunConfig& config, const std::string& out_dir);
nlohmann::json run_simulate(const RunConfig& config, const std::string& out_dir);

}  // namespace mtg
