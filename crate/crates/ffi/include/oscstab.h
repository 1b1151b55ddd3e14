#ifndef OSCSTAB_H
#define OSCSTAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum OscStatus {
  OSC_STATUS_OK = 0,
  OSC_STATUS_NULL_POINTER = 1,
  OSC_STATUS_INVALID_ARGUMENT = 2,
  OSC_STATUS_BUFFER_TOO_SMALL = 3,
  OSC_STATUS_ILL_CONDITIONED = 4,
  OSC_STATUS_NON_FINITE = 5,
  OSC_STATUS_RESONANCE = 6,
  OSC_STATUS_INTERNAL = 7,
  OSC_STATUS_PANIC = 8,
} OscStatus;

// Integration mode.
typedef enum OscMode {
  OSC_MODE_CLASSICAL = 0,
  OSC_MODE_SAMPLED = 1,
} OscMode;

// Opaque feedback law.
typedef struct OscLaw OscLaw;

// Opaque vector-field system.
typedef struct OscSystem OscSystem;

// Opaque trajectory.
typedef struct OscTrajectory OscTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL,
// or 0 when there is no error.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t osc_last_error_message(char *buf, size_t len);

// Creates the ten-dimensional, four-input Brockett integrator.
//
// # Safety
// `out` must be a valid pointer; the handle is released with
// [`osc_system_free`].
enum OscStatus osc_system_brockett(struct OscSystem **out);

// # Safety
// `sys` must be null or a handle from this library, not yet freed.
void osc_system_free(struct OscSystem *sys);

// State dimension, input count and number of bracket pairs.
//
// # Safety
// Pointers must be valid.
enum OscStatus osc_system_dims(const struct OscSystem *sys, size_t *n, size_t *m, size_t *pairs);

// Lie bracket `[f_i, f_j](x)` with zero-based indices.
//
// # Safety
// `x` holds `n` values, `out` has room for `out_len` values.
enum OscStatus osc_system_lie_bracket(const struct OscSystem *sys,
                                      size_t i,
                                      size_t j,
                                      const double *x,
                                      size_t n,
                                      double *out,
                                      size_t out_len);

// Row-major `F(x) = [f_1 … f_m, f^I …]` and its 1-norm condition number
// (`+inf` when singular).
//
// # Safety
// `x` holds `n` values, `out` has room for `out_len ≥ n²` values.
enum OscStatus osc_system_bracket_matrix(const struct OscSystem *sys,
                                         const double *x,
                                         size_t n,
                                         double *out,
                                         size_t out_len,
                                         double *condition);

// Brockett feedback law with exponent `p`, gain `gamma` and period `eps`.
// `kappa` may be null (multipliers 1..6) or hold `kappa_len = 6` distinct
// positive multipliers in pair order. `synthesized != 0` computes the
// components by inverting `F(x)` instead of using the closed forms.
//
// # Safety
// `kappa` is null or holds `kappa_len` values; `out` must be valid.
enum OscStatus osc_law_brockett(double p,
                                double gamma,
                                double eps,
                                const uint32_t *kappa,
                                size_t kappa_len,
                                int32_t synthesized,
                                struct OscLaw **out);

// # Safety
// `law` must be null or a handle from this library, not yet freed.
void osc_law_free(struct OscLaw *law);

// Input `u(x, t)` into `out` (length ≥ input count).
//
// # Safety
// `x` holds `n` values, `out` has room for `out_len` values.
enum OscStatus osc_law_feedback(const struct OscLaw *law,
                                const double *x,
                                size_t n,
                                double t,
                                double *out,
                                size_t out_len);

// Certificate `W = α + γ²β` at `x` for gain `gamma`.
//
// # Safety
// `x` holds `n` values; `w`, `alpha`, `beta` are valid or null (skipped).
enum OscStatus osc_law_certificate(const struct OscLaw *law,
                                   const double *x,
                                   size_t n,
                                   double gamma,
                                   double *w,
                                   double *alpha,
                                   double *beta);

// Open gain interval of the Brockett certificate.
//
// # Safety
// `lower` and `upper` must be valid.
enum OscStatus osc_stability_gain_range(double p, double h, double *lower, double *upper);

// Integrates the closed loop over `round(horizon/eps)` periods with
// `substeps` RK4 steps per period.
//
// # Safety
// `x0` holds `n` values; `out` must be valid. Release with
// [`osc_trajectory_free`].
enum OscStatus osc_integrate(const struct OscLaw *law,
                             const double *x0,
                             size_t n,
                             double horizon,
                             size_t substeps,
                             enum OscMode mode,
                             struct OscTrajectory **out);

// # Safety
// `traj` must be null or a handle from this library, not yet freed.
void osc_trajectory_free(struct OscTrajectory *traj);

// Sample count, completed windows and divergence flag (0 or 1).
//
// # Safety
// Pointers must be valid.
enum OscStatus osc_trajectory_info(const struct OscTrajectory *traj,
                                   size_t *samples,
                                   size_t *windows,
                                   int32_t *diverged);

// Time and state of sample `index`.
//
// # Safety
// `t` valid; `out` has room for `out_len` values.
enum OscStatus osc_trajectory_sample(const struct OscTrajectory *traj,
                                     size_t index,
                                     double *t,
                                     double *out,
                                     size_t out_len);

// `‖x(jε)‖` for every reached boundary `j = 0, 1, …`; `out_len` must be at
// least the window count plus one.
//
// # Safety
// `out` has room for `out_len` values.
enum OscStatus osc_trajectory_boundary_norms(const struct OscTrajectory *traj,
                                             double *out,
                                             size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSCSTAB_H */
