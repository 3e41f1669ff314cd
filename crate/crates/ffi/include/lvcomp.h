#ifndef LVCOMP_H
#define LVCOMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LvcStatus {
  LVC_STATUS_OK = 0,
  LVC_STATUS_NULL_POINTER = 1,
  LVC_STATUS_INVALID_ARGUMENT = 2,
  LVC_STATUS_NUMERICAL_FAILURE = 3,
  LVC_STATUS_BUFFER_TOO_SMALL = 4,
  LVC_STATUS_OUT_OF_RANGE = 5,
  LVC_STATUS_PANIC = 6,
} LvcStatus;

typedef enum LvcRegime {
  LVC_REGIME_EXCLUSION_U_WINS = 0,
  LVC_REGIME_EXCLUSION_V_WINS = 1,
  LVC_REGIME_WEAK_COMPETITION = 2,
  LVC_REGIME_STRONG_COMPETITION = 3,
  LVC_REGIME_DEGENERATE = 4,
} LvcRegime;

typedef enum LvcEquilibriumKind {
  LVC_EQUILIBRIUM_KIND_ORIGIN = 0,
  LVC_EQUILIBRIUM_KIND_U_AXIS = 1,
  LVC_EQUILIBRIUM_KIND_V_AXIS = 2,
  LVC_EQUILIBRIUM_KIND_INTERIOR = 3,
} LvcEquilibriumKind;

typedef enum LvcStability {
  LVC_STABILITY_SINK = 0,
  LVC_STABILITY_SOURCE = 1,
  LVC_STABILITY_SADDLE = 2,
  LVC_STABILITY_SPIRAL_SINK = 3,
  LVC_STABILITY_SPIRAL_SOURCE = 4,
  LVC_STABILITY_CENTER = 5,
  LVC_STABILITY_NON_HYPERBOLIC = 6,
  LVC_STABILITY_UNCLASSIFIABLE = 7,
} LvcStability;

typedef enum LvcSpecies {
  LVC_SPECIES_U = 0,
  LVC_SPECIES_V = 1,
} LvcSpecies;

typedef enum LvcOutcome {
  LVC_OUTCOME_U_WINS = 0,
  LVC_OUTCOME_V_WINS = 1,
  LVC_OUTCOME_COEXIST = 2,
  LVC_OUTCOME_UNDECIDED = 3,
} LvcOutcome;

/**
 * Opaque kinetic parameter set.
 */
typedef struct LvcParams LvcParams;

/**
 * Opaque integrated trajectory.
 */
typedef struct LvcTrajectory LvcTrajectory;

/**
 * One fixed point. `trace` and `det` are NaN when the Jacobian does not exist.
 */
typedef struct LvcEquilibrium {
  double u;
  double v;
  enum LvcEquilibriumKind kind;
  enum LvcStability stability;
  double trace;
  double det;
} LvcEquilibrium;

/**
 * Summary of a reaction-diffusion run. Extinction times are NaN when the
 * species did not die out.
 */
typedef struct LvcPdeSummary {
  enum LvcOutcome outcome;
  double t_reached;
  double u_extinction_time;
  double v_extinction_time;
  size_t steps;
} LvcPdeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to fit) and return the full message length in bytes, excluding
 * the terminator. Passing a null `buf` only queries the length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t lvc_last_error_message(char *buf, size_t len);

/**
 * Create a parameter set. Exponents must lie in `(0, 1]`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum LvcStatus lvc_params_new(double a1,
                              double a2,
                              double b1,
                              double b2,
                              double c1,
                              double c2,
                              double p,
                              double q,
                              struct LvcParams **out);

/**
 * # Safety
 * `params` must be null or a handle from [`lvc_params_new`] not yet freed.
 */
void lvc_params_free(struct LvcParams *params);

/**
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_params_regime(const struct LvcParams *params, enum LvcRegime *out);

/**
 * Right-hand side of the kinetics at `(u, v)`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_rhs(const struct LvcParams *params, double u, double v, double *du, double *dv);

/**
 * Write up to `cap` equilibria into `buf` and their total number into
 * `count`. Returns `BufferTooSmall` (with `count` set) if `cap` is short.
 *
 * # Safety
 * `buf` must point to `cap` writable elements (may be null when `cap` is 0).
 */
enum LvcStatus lvc_equilibria(const struct LvcParams *params,
                              struct LvcEquilibrium *buf,
                              size_t cap,
                              size_t *count);

/**
 * Extinction threshold `f(u0)` on the `v` axis; needs `p < 1` and `q = 1`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_fte_threshold(const struct LvcParams *params, double u0, double *out);

/**
 * Integrate from `(u0, v0)` to `t_end`. Non-positive `rtol`/`atol` select
 * the defaults.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_integrate(const struct LvcParams *params,
                             double u0,
                             double v0,
                             double t_end,
                             double rtol,
                             double atol,
                             struct LvcTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle from [`lvc_integrate`] not yet freed.
 */
void lvc_trajectory_free(struct LvcTrajectory *traj);

/**
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_trajectory_len(const struct LvcTrajectory *traj, size_t *out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_trajectory_sample(const struct LvcTrajectory *traj,
                                     size_t index,
                                     double *t,
                                     double *u,
                                     double *v);

/**
 * Extinction time of `species`, or NaN if it never died out.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_trajectory_extinction_time(const struct LvcTrajectory *traj,
                                              enum LvcSpecies which,
                                              double *out);

/**
 * Where the trajectory settled. `decided` is 0 when it ran out of time, in
 * which case `(u, v)` is the final state.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_trajectory_terminal(const struct LvcTrajectory *traj,
                                       double *u,
                                       double *v,
                                       int32_t *decided);

/**
 * Closed-form solution of the comparison equation at time `t`, and its
 * extinction time (NaN when there is none).
 *
 * # Safety
 * Pointers must be valid.
 */
enum LvcStatus lvc_comparison(double c4,
                              double c5,
                              double c2,
                              double alpha,
                              double g0,
                              double t,
                              double *value,
                              double *extinction_time);

/**
 * Run the resource-driven system `u_t = d1 u_xx + m u - u^2 - b u^p v`,
 * `v_t = d2 v_xx + m v - v^2 - c u v` on `[0, length]` with zero-flux ends.
 * `m`, `u`, `v` hold `n` cell values; `u` and `v` are overwritten with the
 * final fields.
 *
 * # Safety
 * `m`, `u` and `v` must each point to `n` elements; `summary` must be valid.
 */
enum LvcStatus lvc_pde_inhomogeneous(const double *m,
                                     size_t n,
                                     double length,
                                     double b,
                                     double c,
                                     double p,
                                     double d1,
                                     double d2,
                                     double t_end,
                                     double *u,
                                     double *v,
                                     struct LvcPdeSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LVCOMP_H */
