/*
 * mtgibbs - fitting, diagnosing and simulating multitype Gibbs point process
 * models for replicated marked point patterns.
 *
 * C interface of the shared library. All heavy lifting happens behind two
 * opaque handle types:
 *
 *   mtg_cohort  - a loaded cohort of marked point patterns with covariates
 *   mtg_model   - a fitted model (from mtg_run_fit output files)
 *
 * Every entry point returns MTG_OK or an error status; the per-thread message
 * for the most recent failure is available through mtg_last_error(). Strings
 * returned through char** outputs are heap-allocated; release them with
 * mtg_string_free().
 *
 * Commands take a JSON configuration document (see the README for the
 * schema) and an output directory; they write their CSV/JSON artifacts there
 * and hand back a machine-readable JSON report. Runs are deterministic for a
 * fixed configuration and seed.
 */

#ifndef MTGIBBS_H
#define MTGIBBS_H

#if defined(_WIN32)
#define MTG_API __declspec(dllexport)
#else
#define MTG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtg_status {
  MTG_OK = 0,
  MTG_ERR_IO = 1,             /* file missing or unreadable/unwritable */
  MTG_ERR_SCHEMA = 2,         /* malformed table, manifest or config */
  MTG_ERR_GEOMETRY = 3,       /* empty intersection, over-erosion, bad rings */
  MTG_ERR_DEGENERATE = 4,     /* degenerate geometry or model */
  MTG_ERR_SINGULAR = 5,       /* rank-deficient design (aliased columns) */
  MTG_ERR_NONCONVERGENCE = 6, /* IRLS failed to converge */
  MTG_ERR_UNSTABLE = 7,       /* locally unstable simulation spec */
  MTG_ERR_INVALID = 8,        /* invalid argument or precondition */
  MTG_ERR_INTERNAL = 9
} mtg_status;

typedef struct mtg_cohort mtg_cohort;
typedef struct mtg_model mtg_model;

MTG_API const char* mtg_version(void);
MTG_API const char* mtg_status_name(mtg_status status);

/* Message of the most recent error on this thread; empty string if none. */
MTG_API const char* mtg_last_error(void);

MTG_API void mtg_string_free(char* s);

/* ---- cohorts ---------------------------------------------------------- */

/* Loads a cohort manifest (JSON: marks, patient cell tables, covariates). */
MTG_API mtg_status mtg_cohort_load(const char* manifest_path, mtg_cohort** out);
MTG_API void mtg_cohort_free(mtg_cohort* cohort);
MTG_API int mtg_cohort_size(const mtg_cohort* cohort);
MTG_API mtg_status mtg_cohort_info_json(const mtg_cohort* cohort,
                                        char** out_json);

/* Restricts every pattern to the window stored in a window JSON file (the
 * output of mtg_run_window) and records it as the common window. */
MTG_API mtg_status mtg_cohort_set_window(mtg_cohort* cohort,
                                         const char* window_json_path);

/* ---- fitted models ---------------------------------------------------- */

MTG_API mtg_status mtg_model_load(const char* model_json_path, mtg_model** out);
MTG_API void mtg_model_free(mtg_model* model);
MTG_API mtg_status mtg_model_summary_json(const mtg_model* model,
                                          char** out_json);

/* ---- pipeline commands ------------------------------------------------ */

MTG_API mtg_status mtg_run_window(const mtg_cohort* cohort,
                                  const char* config_json, const char* out_dir,
                                  char** report_json);
MTG_API mtg_status mtg_run_summaries(const mtg_cohort* cohort,
                                     const char* config_json,
                                     const char* out_dir, char** report_json);
MTG_API mtg_status mtg_run_profile(const mtg_cohort* cohort,
                                   const char* config_json, const char* out_dir,
                                   char** report_json);
MTG_API mtg_status mtg_run_fit(const mtg_cohort* cohort, const char* config_json,
                               const char* out_dir, char** report_json);
MTG_API mtg_status mtg_run_residuals(const mtg_cohort* cohort,
                                     mtg_model* const* models, int n_models,
                                     const char* config_json,
                                     const char* out_dir, char** report_json);
MTG_API mtg_status mtg_run_simulate(const char* config_json, const char* out_dir,
                                    char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* MTGIBBS_H */
