/* C interface to the recloop simulation library.
 *
 * Conventions:
 *  - Every function returning rfl_status sets a thread-local message
 *    retrievable via rfl_last_error() when it fails.
 *  - Strings returned through char** out parameters are heap-allocated;
 *    release them with rfl_string_free().
 *  - Handles are opaque; free them with the matching *_free function.
 *  - JSON documents are UTF-8, schema documented in the README.
 */
#ifndef RECLOOP_H
#define RECLOOP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RFL_API __declspec(dllexport)
#else
#define RFL_API __attribute__((visibility("default")))
#endif

typedef enum rfl_status {
    RFL_OK = 0,
    RFL_ERR_INVALID = 1, /* bad arguments, config, or input data */
    RFL_ERR_RUNTIME = 2, /* I/O failure or internal error */
    RFL_ERR_PARTIAL = 3  /* sweep finished but some cells failed */
} rfl_status;

typedef struct rfl_log rfl_log;     /* interaction log */
typedef struct rfl_model rfl_model; /* trained scoring model */

/* Progress callback: one JSON line per simulated epoch. May be NULL. */
typedef void (*rfl_progress_fn)(const char* json_line, void* user_data);

RFL_API const char* rfl_version(void);

/* Message for the most recent failing call on this thread ("" if none). */
RFL_API const char* rfl_last_error(void);

RFL_API void rfl_string_free(char* s);

/* ---------- configuration ---------- */

/* The complete default configuration document. */
RFL_API rfl_status rfl_default_config_json(char** out_json);

/* Layer a config document (NULL for defaults only) and "dotted.path=value"
 * override strings over the defaults. Unknown keys are errors. */
RFL_API rfl_status rfl_config_merge(const char* config_json_or_null,
                                    const char* const* overrides, size_t n_overrides,
                                    char** out_json);

/* ---------- interaction logs ---------- */

/* options_json (all optional): {"preset": "canonical"|"lastfm"|"amazon"|
 * "custom", "delimiter": ",", "has_header": true, "user_column": ...,
 * "item_column": ..., "time_column": ..., "user_position": 0,
 * "item_position": 1, "time_position": 2, "time_format":
 * "auto"|"epoch_seconds"|"iso_date"|"day_index"}. NULL means the canonical
 * preset. Custom fields apply only with preset "custom". */
RFL_API rfl_status rfl_log_load(const char* path, const char* options_json, rfl_log** out);

/* params_json keys mirror the config's data.synth section; NULL for
 * defaults. */
RFL_API rfl_status rfl_log_synth(const char* params_json, rfl_log** out);

RFL_API rfl_status rfl_log_write(const rfl_log* log, const char* path);

RFL_API rfl_status rfl_log_filter_active(const rfl_log* log, int min_active_months,
                                         rfl_log** out);

/* {"users", "items", "events", "span_days"} */
RFL_API rfl_status rfl_log_summary(const rfl_log* log, char** out_json);

RFL_API void rfl_log_free(rfl_log* log);

/* Consumption metrics over a day window. options_json keys (all optional):
 * begin, end, jaccard_exact_max_users, jaccard_sample_pairs, jaccard_seed. */
RFL_API rfl_status rfl_metrics(const rfl_log* log, const char* options_json,
                               char** out_json);

/* ---------- scoring models ---------- */

/* options_json (all optional): {"kind": "popularity"|"itemknn"|"bpr"|
 * "random", "window": [begin_day, end_day], "seed": 42,
 * "itemknn": {"k_neighbors", "shrink"},
 * "bpr": {"dim", "learning_rate", "l2", "epochs", "init_std"}}.
 * The window defaults to the full log span. */
RFL_API rfl_status rfl_model_train(const rfl_log* log, const char* options_json,
                                   rfl_model** out);

RFL_API rfl_status rfl_model_score(const rfl_model* model, uint32_t user, uint32_t item,
                                   double* out_score);

/* {"items": [...], "scores": [...]}, scores non-increasing. */
RFL_API rfl_status rfl_model_top_k(const rfl_model* model, uint32_t user, int k,
                                   char** out_json);

/* Ranking quality against events in [test_begin, test_end):
 * {"ndcg", "precision", "recall", "item_coverage", "eval_users"}. */
RFL_API rfl_status rfl_model_evaluate(const rfl_model* model, const rfl_log* log,
                                      int test_begin, int test_end, int k,
                                      char** out_json);

RFL_API rfl_status rfl_model_save(const rfl_model* model, const char* path);
RFL_API rfl_status rfl_model_load(const char* path, rfl_model** out);
RFL_API void rfl_model_free(rfl_model* model);

/* ---------- commands ---------- */

/* One simulation run per the merged config document. out_dir may be NULL
 * (nothing written). resume != 0 continues from out_dir/checkpoint.json.
 * Returns the run manifest (includes the epoch reports). */
RFL_API rfl_status rfl_cmd_simulate(const char* config_json, const char* out_dir_or_null,
                                    int resume, rfl_progress_fn progress, void* user_data,
                                    char** out_manifest_json);

/* Full model x eta x run grid under <out_root>/<sweep_id>/. sweep_id NULL
 * derives a deterministic id from the config digest. jobs < 1 means 1.
 * RFL_ERR_PARTIAL: some cells failed (manifest still returned). */
RFL_API rfl_status rfl_cmd_sweep(const char* config_json, const char* out_root,
                                 const char* sweep_id_or_null, int jobs,
                                 rfl_progress_fn progress, void* user_data,
                                 char** out_manifest_json);

/* Plot-ready CSV from a finished sweep. options_json: {"series": ...,
 * "out": path, "model": ..., "eta": ..., "run": ...}. */
RFL_API rfl_status rfl_cmd_export(const char* sweep_dir, const char* options_json);

#ifdef __cplusplus
}
#endif

#endif /* RECLOOP_H */
