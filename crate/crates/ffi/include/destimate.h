#ifndef DESTIMATE_H
#define DESTIMATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DestStatus {
  DEST_STATUS_OK = 0,
  DEST_STATUS_NULL_POINTER = 1,
  DEST_STATUS_INVALID_UTF8 = 2,
  DEST_STATUS_PARSE = 3,
  DEST_STATUS_DIMENSION_MISMATCH = 4,
  DEST_STATUS_PRECONDITION = 5,
  DEST_STATUS_TOPOLOGY = 6,
  DEST_STATUS_NOT_DETECTABLE = 7,
  DEST_STATUS_SYNTHESIS_FAILURE = 8,
  DEST_STATUS_NUMERIC_FAILURE = 9,
  DEST_STATUS_NON_FINITE = 10,
  DEST_STATUS_INTERNAL = 11,
  DEST_STATUS_IO = 12,
  DEST_STATUS_OUT_OF_RANGE = 13,
  DEST_STATUS_PANIC = 14,
} DestStatus;

/**
 * Synthesized or loaded distributed estimator.
 */
typedef struct DestEstimator DestEstimator;

/**
 * Plant, graph and run settings.
 */
typedef struct DestScenario DestScenario;

typedef struct DestTrace DestTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *dest_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *dest_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void dest_string_free(char *s);

/**
 * Parses a scenario document.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum DestStatus dest_scenario_from_json(const char *json, struct DestScenario **out);

/**
 * The built-in two-sensor demo scenario.
 *
 * # Safety
 * `out` must be writable.
 */
enum DestStatus dest_scenario_demo(struct DestScenario **out);

/**
 * # Safety
 * `sc` must be NULL or a handle from this library, not yet freed.
 */
void dest_scenario_free(struct DestScenario *sc);

/**
 * State, input, functional and node counts. Any out-pointer may be NULL.
 *
 * # Safety
 * `sc` must be a live handle; non-NULL out-pointers must be writable.
 */
enum DestStatus dest_scenario_dims(const struct DestScenario *sc,
                                   size_t *n,
                                   size_t *m,
                                   size_t *r,
                                   size_t *l);

/**
 * Structural analysis. `detectable` receives 1 when the plant is jointly
 * partially detectable and the graph is admissible. `report_json` may be
 * NULL; otherwise it receives the full report.
 *
 * # Safety
 * `sc` must be a live handle; non-NULL out-pointers must be writable.
 */
enum DestStatus dest_analyze(const struct DestScenario *sc, int *detectable, char **report_json);

/**
 * Distributed synthesis. Pass NaN as `gamma` to use the scenario setting
 * or the computed bound.
 *
 * # Safety
 * `sc` must be a live handle; `out` must be writable.
 */
enum DestStatus dest_synthesize(const struct DestScenario *sc,
                                double gamma,
                                struct DestEstimator **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum DestStatus dest_estimator_from_json(const char *json, struct DestEstimator **out);

/**
 * # Safety
 * `est` must be a live handle; `out` must be writable.
 */
enum DestStatus dest_estimator_to_json(const struct DestEstimator *est, char **out);

/**
 * # Safety
 * `est` must be a live handle; non-NULL out-pointers must be writable.
 */
enum DestStatus dest_estimator_info(const struct DestEstimator *est, size_t *q, double *gamma);

/**
 * # Safety
 * `est` must be NULL or a handle from this library, not yet freed.
 */
void dest_estimator_free(struct DestEstimator *est);

/**
 * Simulates the scenario's run settings. Non-positive or NaN `t_end` and
 * `dt` keep the scenario values.
 *
 * # Safety
 * `sc` and `est` must be live handles; `out` must be writable.
 */
enum DestStatus dest_simulate(const struct DestScenario *sc,
                              const struct DestEstimator *est,
                              double t_end,
                              double dt,
                              struct DestTrace **out);

/**
 * Number of samples and nodes. Either out-pointer may be NULL.
 *
 * # Safety
 * `tr` must be a live handle; non-NULL out-pointers must be writable.
 */
enum DestStatus dest_trace_size(const struct DestTrace *tr, size_t *samples, size_t *nodes);

/**
 * Time and `‖eᵢ‖` of node `node` at sample `k`. Either out-pointer may be
 * NULL.
 *
 * # Safety
 * `tr` must be a live handle; non-NULL out-pointers must be writable.
 */
enum DestStatus dest_trace_sample(const struct DestTrace *tr,
                                  size_t k,
                                  size_t node,
                                  double *time,
                                  double *error_norm);

/**
 * Full trace as CSV text.
 *
 * # Safety
 * `tr` must be a live handle; `out` must be writable.
 */
enum DestStatus dest_trace_to_csv(const struct DestTrace *tr, char **out);

/**
 * # Safety
 * `tr` must be NULL or a handle from this library, not yet freed.
 */
void dest_trace_free(struct DestTrace *tr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DESTIMATE_H */
