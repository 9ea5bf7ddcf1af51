#ifndef MFLQR_H
#define MFLQR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MflqrStatus {
  MFLQR_STATUS_OK = 0,
  MFLQR_STATUS_NULL_POINTER = 1,
  MFLQR_STATUS_SHAPE = 2,
  MFLQR_STATUS_SINGULAR = 3,
  MFLQR_STATUS_NUMERICAL = 4,
  MFLQR_STATUS_RANGE = 5,
  MFLQR_STATUS_INVALID = 6,
  MFLQR_STATUS_CONFIG = 7,
  MFLQR_STATUS_IO = 8,
  MFLQR_STATUS_PANIC = 9,
} MflqrStatus;

// Opaque decoupled gain schedule.
typedef struct MflqrSchedule MflqrSchedule;

// Opaque system description.
typedef struct MflqrSpec MflqrSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`) and returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t mflqr_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *mflqr_version(void);

// Builds a time-invariant spec.
//
// `a` and `c` are `n×n`, `b` is `n×m`, `p` and `q` are `n×n`, `r` is `m×m`.
// `support` holds `n_atoms` atoms of length `n`, one per row.
//
// # Safety
// Every array must hold the number of doubles stated above; `out` must be writable.
enum MflqrStatus mflqr_spec_new_time_invariant(size_t k,
                                               size_t n,
                                               size_t m,
                                               size_t horizon,
                                               const double *a,
                                               const double *b,
                                               const double *c,
                                               const double *p,
                                               const double *q,
                                               const double *r,
                                               double lambda,
                                               size_t n_atoms,
                                               const double *support,
                                               const double *probs,
                                               struct MflqrSpec **out);

// Loads the system section of an experiment config, at `λ = 0`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MflqrStatus mflqr_spec_from_config(const char *path, struct MflqrSpec **out);

// Copy of `spec` with risk weight `lambda`.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum MflqrStatus mflqr_spec_with_lambda(const struct MflqrSpec *spec,
                                        double lambda,
                                        struct MflqrSpec **out);

// # Safety
// `spec` must be a live handle; each output pointer must be null or writable.
enum MflqrStatus mflqr_spec_dims(const struct MflqrSpec *spec,
                                 size_t *k,
                                 size_t *n,
                                 size_t *m,
                                 size_t *horizon);

// # Safety
// `spec` must be null or a handle not yet freed.
void mflqr_spec_free(struct MflqrSpec *spec);

// # Safety
// `spec` must be a live handle; `out` must be writable.
enum MflqrStatus mflqr_solve_mean_field(const struct MflqrSpec *spec, struct MflqrSchedule **out);

// # Safety
// `schedule` must be null or a handle not yet freed.
void mflqr_schedule_free(struct MflqrSchedule *schedule);

// Writes `K_t`, `K̄_t` (`m×n` each) and `f_t` (`m`) for `t < T`.
//
// # Safety
// `schedule` must be a live handle; outputs must hold the stated number of doubles.
enum MflqrStatus mflqr_schedule_gain(const struct MflqrSchedule *schedule,
                                     size_t t,
                                     double *gain,
                                     double *gain_bar,
                                     double *offset);

// Writes `S_t`, `S̄_t` (`n×n` each) and `g_t` (`n`) for `t ≤ T`.
//
// # Safety
// `schedule` must be a live handle; outputs must hold the stated number of doubles.
enum MflqrStatus mflqr_schedule_cost_to_go(const struct MflqrSchedule *schedule,
                                           size_t t,
                                           double *cost_to_go,
                                           double *cost_to_go_bar,
                                           double *linear_term);

// `u = K_t(x − x̄) + K̄_t x̄ + f_t` for one subsystem.
//
// # Safety
// `schedule` must be a live handle; `state` and `mean_field` hold `n` doubles, `control` holds `m`.
enum MflqrStatus mflqr_schedule_control(const struct MflqrSchedule *schedule,
                                        size_t t,
                                        const double *state,
                                        const double *mean_field,
                                        double *control);

// Monte Carlo time averages of `c^{x,avg}`, `c^{x,max}`, `c^{u,avg}`, `c^{u,max}`.
//
// `x0` holds `k` initial states of length `n`, one per row. `out` receives
// 12 doubles: mean, lower and upper band for each series in that order.
//
// # Safety
// Handles must be live; `x0` holds `k·n` doubles and `out` holds 12.
enum MflqrStatus mflqr_ensemble_time_averages(const struct MflqrSpec *spec,
                                              const struct MflqrSchedule *schedule,
                                              const double *x0,
                                              size_t n_runs,
                                              uint64_t seed,
                                              double tail,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFLQR_H */
