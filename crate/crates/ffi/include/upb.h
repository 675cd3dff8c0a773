#ifndef UPB_H
#define UPB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Zero is success.
 */
typedef enum UpbStatus {
  UPB_STATUS_OK = 0,
  UPB_STATUS_NULL_POINTER = 1,
  UPB_STATUS_INVALID_ARGUMENT = 2,
  UPB_STATUS_UNDEFINED_CORRELATION = 3,
  UPB_STATUS_SOLVER_FAILED = 4,
  UPB_STATUS_IO = 5,
  UPB_STATUS_PANIC = 6,
} UpbStatus;

/**
 * Opaque delay-correlation curve.
 */
typedef struct UpbCorrelation UpbCorrelation;

/**
 * Opaque trajectory ensemble.
 */
typedef struct UpbEnsemble UpbEnsemble;

/**
 * Model parameters in units of ħκ and 1/κ. A drive with `sigma_t <= 0` is
 * constant; otherwise it is a train of `n_pulses` Gaussian pulses centered
 * at `t0 + k·period`.
 */
typedef struct UpbParams {
  double delta1;
  double delta2;
  double u1;
  double u2;
  double j_coupling;
  double kappa1;
  double kappa2;
  double amplitude;
  double sigma_t;
  double period;
  double t0;
  size_t n_pulses;
} UpbParams;

/**
 * Steady-state occupations and zero-delay correlation of cavity 1.
 */
typedef struct UpbSteadyState {
  double n1;
  double n2;
  double g2_zero;
} UpbSteadyState;

/**
 * Settings of a trajectory campaign. `fluctuation_channel2` selects the
 * displaced-field unraveling of cavity 2 (requires `mean_field_frame`).
 */
typedef struct UpbEnsembleConfig {
  size_t n1_levels;
  size_t n2_levels;
  double horizon;
  size_t n_traj;
  uint64_t master_seed;
  bool mean_field_frame;
  bool fluctuation_channel2;
  double rtol;
  double atol;
} UpbEnsembleConfig;

/**
 * Sliding-window pair statistics of the channel-1 records.
 */
typedef struct UpbPairCount {
  uint64_t pair_count;
  uint64_t singles;
  double poisson_expected;
  double g2;
  double error;
  bool one_sided;
} UpbPairCount;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, excluding
 * the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t upb_last_error_message(char *buf, size_t len);

/**
 * Optimal coupling J and detuning Δ (units of ħκ) for a Kerr energy U.
 *
 * # Safety
 * `j_out` and `delta_out` must be valid for writes.
 */
enum UpbStatus upb_optimal_conditions(double u, double *j_out, double *delta_out);

/**
 * Solves for the steady state under a constant drive.
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum UpbStatus upb_steady_state(const struct UpbParams *params,
                                size_t n1_levels,
                                size_t n2_levels,
                                struct UpbSteadyState *out);

/**
 * g⁽²⁾(τ) of cavity 1 on `points` delays evenly spaced over `[0, tau_max]`.
 *
 * # Safety
 * `params` must be readable and `out` writable. The handle written to `out`
 * must be released with [`upb_correlation_free`].
 */
enum UpbStatus upb_g2_tau(const struct UpbParams *params,
                          size_t n1_levels,
                          size_t n2_levels,
                          double tau_max,
                          size_t points,
                          struct UpbCorrelation **out);

/**
 * Number of points of a correlation curve (0 for a null handle).
 *
 * # Safety
 * `c` must be null or a live handle.
 */
size_t upb_correlation_len(const struct UpbCorrelation *c);

/**
 * # Safety
 * `c` must be a live handle; `tau` and `g2` must be writable.
 */
enum UpbStatus upb_correlation_get(const struct UpbCorrelation *c,
                                   size_t index,
                                   double *tau,
                                   double *g2);

/**
 * # Safety
 * `c` must be null or a handle not yet freed.
 */
void upb_correlation_free(struct UpbCorrelation *c);

/**
 * Runs a Monte Carlo wave-function campaign from vacuum at t = 0.
 *
 * # Safety
 * `params` and `config` must be readable and `out` writable. The handle
 * must be released with [`upb_ensemble_free`].
 */
enum UpbStatus upb_ensemble_run(const struct UpbParams *params,
                                const struct UpbEnsembleConfig *config,
                                struct UpbEnsemble **out);

/**
 * Completed trajectories (0 for a null handle).
 *
 * # Safety
 * `e` must be null or a live handle.
 */
size_t upb_ensemble_trajectories(const struct UpbEnsemble *e);

/**
 * Trajectories that failed and were excluded (0 for a null handle).
 *
 * # Safety
 * `e` must be null or a live handle.
 */
size_t upb_ensemble_failures(const struct UpbEnsemble *e);

/**
 * Number of jumps on `channel` (1 or 2) with time in `[t1, t2)`.
 *
 * # Safety
 * `e` must be a live handle and `count` writable.
 */
enum UpbStatus upb_ensemble_count_events(const struct UpbEnsemble *e,
                                         uint8_t channel,
                                         double t1,
                                         double t2,
                                         uint64_t *count);

/**
 * g⁽²⁾ of detections inside `[t1, t2)` tiled into sub-windows of `delta_t`.
 *
 * # Safety
 * `e` must be a live handle and `out` writable.
 */
enum UpbStatus upb_ensemble_pair_statistics(const struct UpbEnsemble *e,
                                            double t1,
                                            double t2,
                                            double delta_t,
                                            struct UpbPairCount *out);

/**
 * Writes the jump log (CSV plus `.meta.json` sidecar) to a UTF-8 path.
 *
 * # Safety
 * `e` must be a live handle and `path` a NUL-terminated string.
 */
enum UpbStatus upb_ensemble_write_log(const struct UpbEnsemble *e, const char *path);

/**
 * # Safety
 * `e` must be null or a handle not yet freed.
 */
void upb_ensemble_free(struct UpbEnsemble *e);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UPB_H */
