#include "mtgibbs/mtgibbs.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "core/csvio.hpp"
#include "core/pipeline.hpp"

struct mtg_cohort {
  mtg::Cohort cohort;
};

struct mtg_model {
  mtg::FittedModel model;
};

namespace {

thread_local std::string t_last_error;

mtg_status to_status(mtg::Status s) {
  switch (s) {
    case mtg::Status::Ok: return MTG_OK;
    case mtg::Status::Io: return MTG_ERR_IO;
    case mtg::Status::Schema: return MTG_ERR_SCHEMA;
    case mtg::Status::Geometry: return MTG_ERR_GEOMETRY;
    case mtg::Status::Degenerate: return MTG_ERR_DEGENERATE;
    case mtg::Status::Singular: return MTG_ERR_SINGULAR;
    case mtg::Status::NonConvergence: return MTG_ERR_NONCONVERGENCE;
    case mtg::Status::Unstable: return MTG_ERR_UNSTABLE;
    case mtg::Status::Invalid: return MTG_ERR_INVALID;
    case mtg::Status::Internal: return MTG_ERR_INTERNAL;
  }
  return MTG_ERR_INTERNAL;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
mtg_status guard(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return MTG_OK;
  } catch (const mtg::Error& e) {
    t_last_error = e.what();
    return to_status(e.status());
  } catch (const nlohmann::json::exception& e) {
    t_last_error = std::string("JSON error: ") + e.what();
    return MTG_ERR_SCHEMA;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return MTG_ERR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown error";
    return MTG_ERR_INTERNAL;
  }
}

mtg::RunConfig parse_config(const char* config_json) {
  const std::string text =
      config_json == nullptr || *config_json == '\0' ? "{}" : config_json;
  return mtg::RunConfig::from_json(nlohmann::json::parse(text));
}

void emit(char** slot, const nlohmann::json& doc) {
  if (slot != nullptr) *slot = copy_string(doc.dump(2));
}

}  // namespace

extern "C" {

const char* mtg_version(void) { return mtg::kVersion; }

const char* mtg_status_name(mtg_status status) {
  return mtg::status_name(static_cast<mtg::Status>(status));
}

const char* mtg_last_error(void) { return t_last_error.c_str(); }

void mtg_string_free(char* s) { std::free(s); }

mtg_status mtg_cohort_load(const char* manifest_path, mtg_cohort** out) {
  return guard([&] {
    mtg::require(manifest_path != nullptr && out != nullptr,
                 mtg::Status::Invalid, "null argument");
    auto handle = std::make_unique<mtg_cohort>();
    handle->cohort = mtg::load_cohort(manifest_path);
    *out = handle.release();
  });
}

void mtg_cohort_free(mtg_cohort* cohort) { delete cohort; }

int mtg_cohort_size(const mtg_cohort* cohort) {
  return cohort == nullptr ? 0 : static_cast<int>(cohort->cohort.size());
}

mtg_status mtg_cohort_info_json(const mtg_cohort* cohort, char** out_json) {
  return guard([&] {
    mtg::require(cohort != nullptr && out_json != nullptr, mtg::Status::Invalid,
                 "null argument");
    nlohmann::json patients = nlohmann::json::array();
    for (const auto& patient : cohort->cohort.patients)
      patients.push_back(nlohmann::json{
          {"id", patient.pattern.id},
          {"points", patient.pattern.size()},
          {"window_area", patient.pattern.window.area()},
          {"has_covariates", patient.covariates.has_value()}});
    emit(out_json, nlohmann::json{{"marks", cohort->cohort.marks.labels()},
                                  {"patients", std::move(patients)}});
  });
}

mtg_status mtg_cohort_set_window(mtg_cohort* cohort,
                                 const char* window_json_path) {
  return guard([&] {
    mtg::require(cohort != nullptr && window_json_path != nullptr,
                 mtg::Status::Invalid, "null argument");
    const auto doc = nlohmann::json::parse(mtg::read_text_file(window_json_path));
    cohort->cohort.common_window = mtg::window_from_json(doc);
  });
}

mtg_status mtg_model_load(const char* model_json_path, mtg_model** out) {
  return guard([&] {
    mtg::require(model_json_path != nullptr && out != nullptr,
                 mtg::Status::Invalid, "null argument");
    auto handle = std::make_unique<mtg_model>();
    handle->model = mtg::model_from_json(
        nlohmann::json::parse(mtg::read_text_file(model_json_path)));
    *out = handle.release();
  });
}

void mtg_model_free(mtg_model* model) { delete model; }

mtg_status mtg_model_summary_json(const mtg_model* model, char** out_json) {
  return guard([&] {
    mtg::require(model != nullptr && out_json != nullptr, mtg::Status::Invalid,
                 "null argument");
    emit(out_json, mtg::model_to_json(model->model, 0));
  });
}

mtg_status mtg_run_window(const mtg_cohort* cohort, const char* config_json,
                          const char* out_dir, char** report_json) {
  return guard([&] {
    mtg::require(cohort != nullptr && out_dir != nullptr, mtg::Status::Invalid,
                 "null argument");
    emit(report_json,
         mtg::run_window(cohort->cohort, parse_config(config_json), out_dir));
  });
}

mtg_status mtg_run_summaries(const mtg_cohort* cohort, const char* config_json,
                             const char* out_dir, char** report_json) {
  return guard([&] {
    mtg::require(cohort != nullptr && out_dir != nullptr, mtg::Status::Invalid,
                 "null argument");
    emit(report_json,
         mtg::run_summaries(cohort->cohort, parse_config(config_json), out_dir));
  });
}

mtg_status mtg_run_profile(const mtg_cohort* cohort, const char* config_json,
                           const char* out_dir, char** report_json) {
  return guard([&] {
    mtg::require(cohort != nullptr && out_dir != nullptr, mtg::Status::Invalid,
                 "null argument");
    emit(report_json,
         mtg::run_profile(cohort->cohort, parse_config(config_json), out_dir));
  });
}

mtg_status mtg_run_fit(const mtg_cohort* cohort, const char* config_json,
                       const char* out_dir, char** report_json) {
  return guard([&] {
    mtg::require(cohort != nullptr && out_dir != nullptr, mtg::Status::Invalid,
                 "null argument");
    emit(report_json,
         mtg::run_fit(cohort->cohort, parse_config(config_json), out_dir));
  });
}

mtg_status mtg_run_residuals(const mtg_cohort* cohort, mtg_model* const* models,
                             int n_models, const char* config_json,
                             const char* out_dir, char** report_json) {
  return guard([&] {
    mtg::require(cohort != nullptr && out_dir != nullptr && models != nullptr &&
                     n_models > 0,
                 mtg::Status::Invalid, "null argument");
    std::vector<mtg::FittedModel> fitted;
    for (int i = 0; i < n_models; ++i) {
      mtg::require(models[i] != nullptr, mtg::Status::Invalid, "null model");
      fitted.push_back(models[i]->model);
    }
    emit(report_json,
         mtg::run_residuals(cohort->cohort, std::move(fitted),
                            parse_config(config_json), out_dir));
  });
}

mtg_status mtg_run_simulate(const char* config_json, const char* out_dir,
                            char** report_json) {
  return guard([&] {
    mtg::require(out_dir != nullptr, mtg::Status::Invalid, "null argument");
    emit(report_json, mtg::run_simulate(parse_config(config_json), out_dir));
  });
}

}  // extern "C"
