#ifndef NARXSEL_H
#define NARXSEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  NARXSEL_STATUS_OK = 0,
  /**
   * A precondition on the arguments failed (including NULL pointers).
   */
  NARXSEL_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A file or string could not be parsed.
   */
  NARXSEL_STATUS_PARSE_ERROR = 2,
  /**
   * The computation itself failed.
   */
  NARXSEL_STATUS_RUNTIME_ERROR = 3,
} NarxselStatus;

/**
 * Opaque input/output dataset with its estimation split.
 */
typedef struct NarxselDatasetHandle NarxselDatasetHandle;

/**
 * Opaque candidate-term dictionary.
 */
typedef struct NarxselModelSetHandle NarxselModelSetHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or NULL when the last call
 * succeeded. The pointer stays valid until the next failing call on the
 * same thread; do not free it.
 */
const char *narxsel_last_error_message(void);

/**
 * Frees a string returned through an out-pointer.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void narxsel_string_free(char *s);

/**
 * Builds the candidate-term dictionary for the given input/output lag
 * bounds and polynomial degree.
 *
 * # Safety
 * `out` must point to writable memory for one pointer.
 */
NarxselStatus narxsel_model_set_new(size_t n_u,
                                    size_t n_y,
                                    size_t n_l,
                                    NarxselModelSetHandle **out);

/**
 * Number of candidate terms in the dictionary.
 *
 * # Safety
 * `handle` must be a live pointer from `narxsel_model_set_new`.
 */
size_t narxsel_model_set_len(const NarxselModelSetHandle *handle);

/**
 * Textual form of one dictionary term (e.g. `"y(k-1)u(k-2)^2"`).
 *
 * # Safety
 * `handle` must be live; `out` must be writable.
 */
NarxselStatus narxsel_model_set_term(const NarxselModelSetHandle *handle, size_t index, char **out);

/**
 * # Safety
 * `handle` must come from `narxsel_model_set_new` and not be freed twice.
 */
void narxsel_model_set_free(NarxselModelSetHandle *handle);

/**
 * Loads a two-column `u,y` CSV (header row required).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
NarxselStatus narxsel_dataset_from_csv(const char *path,
                                       size_t estimation_len,
                                       NarxselDatasetHandle **out);

/**
 * Generates identification data for a builtin system (`s1`..`s7`,
 * `duffing`) under the given master seed.
 *
 * # Safety
 * `system` must be a NUL-terminated string; `out` must be writable.
 */
NarxselStatus narxsel_dataset_builtin(const char *system,
                                      uint64_t master_seed,
                                      NarxselDatasetHandle **out);

/**
 * Sample count of a dataset.
 *
 * # Safety
 * `handle` must be live or NULL.
 */
size_t narxsel_dataset_len(const NarxselDatasetHandle *handle);

/**
 * # Safety
 * `handle` must come from a dataset constructor and not be freed twice.
 */
void narxsel_dataset_free(NarxselDatasetHandle *handle);

/**
 * Normalized mean squared error, in percent, between a measured and a
 * predicted sequence.
 *
 * # Safety
 * `y` and `y_hat` must point to `len` readable doubles; `out` writable.
 */
NarxselStatus narxsel_nmse(const double *y, const double *y_hat, size_t len, double *out);

/**
 * Preference-ordering weights from objective ranks and an intensity on
 * the 1..9 scale; writes `m` normalized weights.
 *
 * # Safety
 * `ranks` must point to `m` readable values; `weights_out` to `m`
 * writable doubles.
 */
NarxselStatus narxsel_preference_weights(const size_t *ranks,
                                         size_t m,
                                         double intensity,
                                         double *weights_out);

/**
 * Exact 2-D hypervolume (minimization) of `n` points `(x0,y0,x1,y1,...)`
 * bounded by the reference `(r1, r2)`.
 *
 * # Safety
 * `points` must hold `2 * n` readable doubles; `out` writable.
 */
NarxselStatus narxsel_hypervolume(const double *points,
                                  size_t n,
                                  double r1,
                                  double r2,
                                  double *out);

/**
 * Friedman two-way analysis of variance by ranks over a row-major
 * `blocks x treatments` matrix; returns the chi-square statistic and
 * p-value.
 *
 * # Safety
 * `matrix` must hold `blocks * treatments` readable doubles;
 * `statistic_out` and `p_out` must be writable.
 */
NarxselStatus narxsel_friedman(const double *matrix,
                               size_t blocks,
                               size_t treatments,
                               double *statistic_out,
                               double *p_out);

/**
 * Runs the full multi-run structure search described by a TOML
 * configuration string (the same format the CLI reads); returns the
 * pooled archive as JSON. Artifacts are written under `out_dir`.
 *
 * # Safety
 * `config_toml` and `out_dir` must be NUL-terminated strings; `json_out`
 * must be writable.
 */
NarxselStatus narxsel_search_json(const char *config_toml,
                                  uint64_t master_seed,
                                  const char *out_dir,
                                  char **json_out);

/**
 * Scores one term subset on a dataset: cardinality, free-run validation
 * NMSE and the goal-penalized criteria.
 *
 * # Safety
 * `ms` and `data` must be live handles; `bits` a NUL-terminated string of
 * `'0'`/`'1'`; the four out-pointers writable.
 */
NarxselStatus narxsel_evaluate_bits(const NarxselModelSetHandle *ms,
                                    const NarxselDatasetHandle *data,
                                    const char *bits,
                                    size_t xi_lim,
                                    double nmse_lim,
                                    size_t *xi_out,
                                    double *nmse_out,
                                    double *j1_out,
                                    double *j2_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NARXSEL_H */
