#ifndef QCTRL_H
#define QCTRL_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QctrlStatus {
  QCTRL_STATUS_OK = 0,
  QCTRL_STATUS_NULL_POINTER = 1,
  QCTRL_STATUS_INVALID_ARGUMENT = 2,
  QCTRL_STATUS_NUMERICAL = 3,
  QCTRL_STATUS_IO = 4,
  QCTRL_STATUS_PARSE = 5,
  QCTRL_STATUS_PANIC = 6,
} QctrlStatus;

typedef enum QctrlMethod {
  QCTRL_METHOD_NELDER_MEAD = 0,
  QCTRL_METHOD_POWELL = 1,
  QCTRL_METHOD_LBFGSB = 2,
} QctrlMethod;

typedef struct QctrlOctResult QctrlOctResult;

typedef struct QctrlSchedule QctrlSchedule;

typedef struct QctrlSystem QctrlSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *qctrl_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void qctrl_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qctrl_version(void);

/**
 * Resonant system with `T = 1` given by `(Tγ, TΩ_max)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum QctrlStatus qctrl_system_new(double t_gamma, double t_omega_max, struct QctrlSystem **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum QctrlStatus qctrl_system_new_full(double delta_p,
                                       double delta_3,
                                       double gamma,
                                       double t_final,
                                       double omega_max,
                                       struct QctrlSystem **out);

/**
 * # Safety
 * `system` must come from `qctrl_system_new*` and not have been freed.
 */
void qctrl_system_free(struct QctrlSystem *system);

/**
 * Step-function schedule from `n` pump and `n` Stokes values.
 *
 * # Safety
 * `pump` and `stokes` must point to `n` doubles; `out` must be valid for
 * writes.
 */
enum QctrlStatus qctrl_schedule_piecewise_constant(double horizon,
                                                   const double *pump,
                                                   const double *stokes,
                                                   size_t n,
                                                   struct QctrlSchedule **out);

/**
 * Reference Gaussian STIRAP pair for `system`, sampled on `n_segments`
 * steps.
 *
 * # Safety
 * `system` must be a live handle; `out` must be valid for writes.
 */
enum QctrlStatus qctrl_schedule_stirap(const struct QctrlSystem *system,
                                       size_t n_segments,
                                       struct QctrlSchedule **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum QctrlStatus qctrl_schedule_from_json(const char *json, struct QctrlSchedule **out);

/**
 * Serializes the schedule; free the result with [`qctrl_string_free`].
 *
 * # Safety
 * `schedule` must be a live handle; `out` must be valid for writes.
 */
enum QctrlStatus qctrl_schedule_to_json(const struct QctrlSchedule *schedule, char **out);

/**
 * Number of segments, or 0 for a null handle.
 *
 * # Safety
 * `schedule` must be null or a live handle.
 */
size_t qctrl_schedule_segments(const struct QctrlSchedule *schedule);

/**
 * # Safety
 * `schedule` must come from this library and not have been freed.
 */
void qctrl_schedule_free(struct QctrlSchedule *schedule);

/**
 * Final population of `|r⟩` after evolving `|g⟩`.
 *
 * # Safety
 * Handles must be live; `out` must be valid for writes.
 */
enum QctrlStatus qctrl_transfer_fidelity(const struct QctrlSystem *system,
                                         const struct QctrlSchedule *schedule,
                                         double *out);

/**
 * Writes populations `(g, e, r, s)` at each of the `N + 1` segment
 * boundaries into `out`, which must hold `4 (N + 1)` doubles.
 *
 * # Safety
 * Handles must be live; `out` must point to `len` writable doubles.
 */
enum QctrlStatus qctrl_populations(const struct QctrlSystem *system,
                                   const struct QctrlSchedule *schedule,
                                   double *out,
                                   size_t len);

/**
 * Best of `restarts` seeded optimizations over `n_segments` steps per
 * control. A `budget` of 0 selects the default evaluation limit.
 *
 * # Safety
 * `system` must be live; `out` must be valid for writes.
 */
enum QctrlStatus qctrl_oct_run(const struct QctrlSystem *system,
                               size_t n_segments,
                               enum QctrlMethod method,
                               size_t restarts,
                               uint64_t seed,
                               size_t budget,
                               struct QctrlOctResult **out);

/**
 * # Safety
 * `result` must be live; `cost` and `fidelity` must be valid for writes.
 */
enum QctrlStatus qctrl_oct_result_cost(const struct QctrlOctResult *result,
                                       double *cost,
                                       double *fidelity);

/**
 * Copies the `2N` optimized step heights (pump then Stokes) into `out`.
 *
 * # Safety
 * `result` must be live; `out` must point to `len` writable doubles.
 */
enum QctrlStatus qctrl_oct_result_alpha(const struct QctrlOctResult *result,
                                        double *out,
                                        size_t len);

/**
 * # Safety
 * Handles must be live; `out` must be valid for writes.
 */
enum QctrlStatus qctrl_oct_result_schedule(const struct QctrlOctResult *result,
                                           const struct QctrlSystem *system,
                                           struct QctrlSchedule **out);

/**
 * # Safety
 * `result` must be live; `out` must be valid for writes.
 */
enum QctrlStatus qctrl_oct_result_to_json(const struct QctrlOctResult *result, char **out);

/**
 * # Safety
 * `result` must come from this library and not have been freed.
 */
void qctrl_oct_result_free(struct QctrlOctResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCTRL_H */
