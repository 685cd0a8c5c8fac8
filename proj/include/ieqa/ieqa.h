/* C interface to the ieqa library. All functions return an ieqa_status; on
 * failure ieqa_last_error() describes the problem (thread-local, valid until
 * the next call on the same thread). Objects are opaque handles released with
 * their matching _free function. Strings returned through char** are owned by
 * the caller and released with ieqa_string_free. */
#ifndef IEQA_IEQA_H
#define IEQA_IEQA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IEQA_API __declspec(dllexport)
#else
#define IEQA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ieqa_status {
  IEQA_OK = 0,
  IEQA_ERR_INVALID_ARGUMENT = 1,
  IEQA_ERR_VALIDATION = 2,
  IEQA_ERR_PARSE = 3,
  IEQA_ERR_DEGENERATE = 4,
  IEQA_ERR_IO = 5,
  IEQA_ERR_NOT_FOUND = 6,
  IEQA_ERR_CONFLICT = 7,
  IEQA_ERR_TOO_EARLY = 8,
  IEQA_ERR_RUNTIME = 9
} ieqa_status;

typedef enum ieqa_log_level {
  IEQA_LOG_DEBUG = 0,
  IEQA_LOG_INFO = 1,
  IEQA_LOG_WARN = 2,
  IEQA_LOG_ERROR = 3,
  IEQA_LOG_OFF = 4
} ieqa_log_level;

IEQA_API const char* ieqa_version(void);
IEQA_API const char* ieqa_status_string(ieqa_status status);
IEQA_API const char* ieqa_last_error(void);
IEQA_API void ieqa_set_log_level(ieqa_log_level level);
IEQA_API void ieqa_string_free(char* s);

/* ---- correlation metrics over paired arrays -------------------------------
 * n >= 2 and finite values; constant input is IEQA_ERR_DEGENERATE. */
IEQA_API ieqa_status ieqa_srocc(const double* pred, const double* target, size_t n, double* out);
IEQA_API ieqa_status ieqa_plcc(const double* pred, const double* target, size_t n, double* out);
IEQA_API ieqa_status ieqa_krcc(const double* pred, const double* target, size_t n, double* out);
IEQA_API ieqa_status ieqa_rmse(const double* pred, const double* target, size_t n, double* out);

/* ---- image metrics over packed 8-bit RGB (width * height * 3 bytes) ------- */
IEQA_API ieqa_status ieqa_mse(const uint8_t* a, const uint8_t* b, int width, int height, double* out);
/* +inf for identical images. */
IEQA_API ieqa_status ieqa_psnr(const uint8_t* a, const uint8_t* b, int width, int height, double* out);
IEQA_API ieqa_status ieqa_ssim(const uint8_t* a, const uint8_t* b, int width, int height, double* out);

/* ---- dataset -------------------------------------------------------------- */
typedef struct ieqa_caseset ieqa_caseset;

IEQA_API ieqa_status ieqa_caseset_load(const char* manifest_path, ieqa_caseset** out);
IEQA_API size_t ieqa_caseset_size(const ieqa_caseset* cs);
/* Borrowed pointer, valid while cs lives. NULL when i is out of range. */
IEQA_API const char* ieqa_caseset_case_id(const ieqa_caseset* cs, size_t i);
IEQA_API const char* ieqa_caseset_prompt(const ieqa_caseset* cs, size_t i);
IEQA_API void ieqa_caseset_free(ieqa_caseset* cs);

/* ---- subjective pipeline --------------------------------------------------
 * Ratings CSV text (rater_id,case_id,dim,score,timestamp) in, MOS CSV text
 * (case_id,dim,mos,n_raters_used) out. */
IEQA_API ieqa_status ieqa_mos_from_ratings(const char* ratings_csv, char** mos_csv);

/* ---- model ---------------------------------------------------------------- */
typedef struct ieqa_model ieqa_model;

/* config_json may be NULL (defaults) or e.g. {"preset":"stub"}. */
IEQA_API ieqa_status ieqa_model_create(const char* config_json, uint64_t seed, ieqa_model** out);
IEQA_API ieqa_status ieqa_model_load(const char* checkpoint_path, ieqa_model** out);
IEQA_API ieqa_status ieqa_model_save(const ieqa_model* m, const char* checkpoint_path);
IEQA_API size_t ieqa_model_parameter_count(const ieqa_model* m);
IEQA_API ieqa_status ieqa_model_predict(const ieqa_model* m, const char* source_path, const char* edited_path,
                                        const char* prompt, double* out);
IEQA_API void ieqa_model_free(ieqa_model* m);

/* ---- scorer registry ------------------------------------------------------ */
typedef enum ieqa_scorer_kind {
  IEQA_SCORER_FULL_REFERENCE = 0,
  IEQA_SCORER_NO_REFERENCE = 1,
  IEQA_SCORER_TEXT_IMAGE = 2
} ieqa_scorer_kind;

typedef struct ieqa_scoring_input {
  const char* case_id;
  const char* prompt;
  const uint8_t* source_rgb;
  int source_width, source_height;
  const uint8_t* edited_rgb;
  int edited_width, edited_height;
} ieqa_scoring_input;

/* Writes the score to *out and returns 0, or returns nonzero to report a
 * failure on this case (the case is then excluded for this scorer). */
typedef int (*ieqa_scorer_fn)(const ieqa_scoring_input* input, void* user_data, double* out);

typedef struct ieqa_scorer_registry ieqa_scorer_registry;

/* Registry pre-filled with psnr, mse, ssim and hist_cosine. */
IEQA_API ieqa_status ieqa_scorer_registry_builtin(ieqa_scorer_registry** out);
IEQA_API ieqa_status ieqa_scorer_registry_add(ieqa_scorer_registry* reg, const char* name, ieqa_scorer_kind kind,
                                              ieqa_scorer_fn fn, void* user_data);
IEQA_API size_t ieqa_scorer_registry_size(const ieqa_scorer_registry* reg);
IEQA_API void ieqa_scorer_registry_free(ieqa_scorer_registry* reg);

/* ---- commands -------------------------------------------------------------
 * Each command writes its outputs (plus run.json) under out_dir and, when
 * result is non-NULL, hands back an ieqa_result. The return value is IEQA_OK,
 * IEQA_ERR_VALIDATION (exit code 1) or IEQA_ERR_RUNTIME (exit code 2). */
typedef struct ieqa_result ieqa_result;

IEQA_API int ieqa_result_exit_code(const ieqa_result* r);
IEQA_API const char* ieqa_result_summary(const ieqa_result* r);
IEQA_API size_t ieqa_result_artifact_count(const ieqa_result* r);
IEQA_API const char* ieqa_result_artifact(const ieqa_result* r, size_t i);
IEQA_API void ieqa_result_free(ieqa_result* r);

IEQA_API ieqa_status ieqa_cmd_ingest(const char* manifest, const char* out_dir, ieqa_result** result);
/* dims: comma-separated dimension names, or NULL/"" for all. */
IEQA_API ieqa_status ieqa_cmd_mos(const char* ratings, const char* out_dir, const char* dims, ieqa_result** result);
/* scorers: comma-separated names or NULL for all; registry NULL = built-ins;
 * dimension NULL = overall_quality. */
IEQA_API ieqa_status ieqa_cmd_baselines(const char* manifest, const char* mos, const char* out_dir, const char* scorers,
                                        const char* dimension, const ieqa_scorer_registry* registry,
                                        ieqa_result** result);

typedef struct ieqa_train_options {
  const char* manifest;
  const char* mos;
  const char* config;  /* NULL for defaults */
  const char* out_dir;
  int has_seed;        /* nonzero: seed overrides the config */
  uint64_t seed;
  int k;               /* 0: take k from the config */
  const char* variants; /* ablate only: comma-separated names or "all" */
} ieqa_train_options;

IEQA_API ieqa_status ieqa_cmd_train(const ieqa_train_options* opts, ieqa_result** result);
IEQA_API ieqa_status ieqa_cmd_ablate(const ieqa_train_options* opts, ieqa_result** result);
IEQA_API ieqa_status ieqa_cmd_report(const char* const* report_paths, size_t n, const char* out_dir,
                                     ieqa_result** result);
IEQA_API ieqa_status ieqa_cmd_synth(const char* out_dir, int n_cases, int n_raters, int n_adversarial, uint64_t seed,
                                    ieqa_result** result);

/* ---- rating service ------------------------------------------------------- */
typedef struct ieqa_rating_server ieqa_rating_server;

typedef struct ieqa_rating_server_options {
  const char* manifest;
  const char* journal;  /* NULL: in-memory only */
  const char* host;     /* NULL: 127.0.0.1 */
  int port;             /* 0: any free port */
  uint64_t seed;        /* default per-session seed */
  const char* raters;   /* comma-separated registered raters; NULL/"" = open */
} ieqa_rating_server_options;

/* Starts serving on a background thread; *bound_port receives the port. */
IEQA_API ieqa_status ieqa_rating_server_start(const ieqa_rating_server_options* opts, int* bound_port,
                                              ieqa_rating_server** out);
IEQA_API void ieqa_rating_server_stop(ieqa_rating_server* s);
IEQA_API void ieqa_rating_server_free(ieqa_rating_server* s);

#ifdef __cplusplus
}
#endif

#endif
