#ifndef TAQP_H
#define TAQP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TaqpStatus {
  TAQP_STATUS_OK = 0,
  TAQP_STATUS_NULL_POINTER = 1,
  TAQP_STATUS_INVALID_ARGUMENT = 2,
  TAQP_STATUS_INFEASIBLE = 3,
  TAQP_STATUS_IO = 4,
  TAQP_STATUS_PARSE = 5,
  TAQP_STATUS_NOT_POSITIVE_DEFINITE = 6,
  TAQP_STATUS_PANIC = 99,
} TaqpStatus;

/**
 * Opaque quadratic program.
 */
typedef struct TaqpProblem TaqpProblem;

/**
 * Opaque simulator with its problem's minimizer.
 */
typedef struct TaqpSim TaqpSim;

typedef struct TaqpSpectral {
  double norm2;
  double lambda_min;
  double cond;
  /**
   * Nonzero when the values are bounds rather than exact.
   */
  uint8_t is_upper_bound;
} TaqpSpectral;

/**
 * Open interval `(lower, upper)`.
 */
typedef struct TaqpInterval {
  double lower;
  double upper;
} TaqpInterval;

typedef struct TaqpRegularizationPlan {
  struct TaqpInterval alpha;
  double k_d;
  double epsilon;
  double predicted_error_bound;
  struct TaqpInterval predicted_stepsize;
} TaqpRegularizationPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full length including the
 * terminator, so a caller can size a buffer by passing `len = 0`.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null with `len = 0`.
 */
size_t taqp_last_error_message(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *taqp_version(void);

/**
 * Builds a problem from a row-major `n x n` matrix `q`, vector `r` of
 * length `n`, and `agents` block sizes summing to `n`.
 *
 * # Safety
 * `q` must point to `n * n` doubles, `r` to `n`, `blocks` to `agents`
 * sizes; `out` must be writable.
 */
enum TaqpStatus taqp_problem_new(size_t n,
                                 const double *q,
                                 const double *r,
                                 const size_t *blocks,
                                 size_t agents,
                                 struct TaqpProblem **out);

/**
 * Random problem with prescribed `||Q||_2`, `k_Q` and `||r||_2`, split
 * evenly over `agents` blocks. Eigenvalues are log-uniformly spread.
 *
 * # Safety
 * `out` must be writable.
 */
enum TaqpStatus taqp_problem_generate(size_t n,
                                      size_t agents,
                                      double norm2,
                                      double cond,
                                      double norm_r,
                                      uint64_t seed,
                                      struct TaqpProblem **out);

/**
 * Loads a JSON problem file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TaqpStatus taqp_problem_load(const char *path, struct TaqpProblem **out);

/**
 * # Safety
 * `problem` must be a live handle; `path` a NUL-terminated string.
 */
enum TaqpStatus taqp_problem_save(const struct TaqpProblem *problem, const char *path);

/**
 * # Safety
 * `problem` must come from this library and not be used afterwards.
 */
void taqp_problem_free(struct TaqpProblem *problem);

/**
 * Dimension `n`, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be a live handle or null.
 */
size_t taqp_problem_dim(const struct TaqpProblem *problem);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be a live handle or null.
 */
size_t taqp_problem_agents(const struct TaqpProblem *problem);

/**
 * Exact extreme eigenvalues, or cheap bounds when `bounds` is nonzero.
 *
 * # Safety
 * `problem` must be a live handle; `out` writable.
 */
enum TaqpStatus taqp_problem_spectral(const struct TaqpProblem *problem,
                                      uint8_t bounds,
                                      struct TaqpSpectral *out);

/**
 * Writes the unconstrained minimizer `-Q^{-1} r` into `out[0..len]`.
 *
 * # Safety
 * `problem` must be a live handle; `out` must hold `len` doubles.
 */
enum TaqpStatus taqp_problem_minimizer(const struct TaqpProblem *problem, double *out, size_t len);

/**
 * Stepsize interval guaranteeing `||I - Gamma Q||_2 < 1`.
 *
 * # Safety
 * `out` must be writable.
 */
enum TaqpStatus taqp_stepsize_interval(double norm2, double cond, struct TaqpInterval *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum TaqpStatus taqp_plan_regularization(double cond,
                                         double norm2,
                                         double norm_r,
                                         double epsilon,
                                         double k_d,
                                         struct TaqpRegularizationPlan *out);

/**
 * Upper bound on `||x_hat - x_hat_A||_2` for regularization weights at most
 * `alpha_max`.
 *
 * # Safety
 * `out` must be writable.
 */
enum TaqpStatus taqp_error_bound(double cond,
                                 double norm2,
                                 double norm_r,
                                 double alpha_max,
                                 double *out);

/**
 * `||I - Gamma Q||_2` for per-agent stepsizes `gammas[0..agents]`.
 *
 * # Safety
 * `problem` must be a live handle; `gammas` must hold `len` doubles.
 */
enum TaqpStatus taqp_contraction_factor(const struct TaqpProblem *problem,
                                        const double *gammas,
                                        size_t len,
                                        double *out);

/**
 * Simulator with Bernoulli updates/transmissions and delays uniform in
 * `[1, max_delay]`. Every agent starts from one common point drawn
 * uniformly from `[-1, 1]^n`. The problem may be freed afterwards.
 *
 * # Safety
 * `problem` must be a live handle; `gammas` must hold `len` doubles; `out`
 * must be writable.
 */
enum TaqpStatus taqp_sim_new(const struct TaqpProblem *problem,
                             const double *gammas,
                             size_t len,
                             double p_update,
                             double p_transmit,
                             uint64_t max_delay,
                             uint64_t seed,
                             struct TaqpSim **out);

/**
 * Advances `steps` ticks.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum TaqpStatus taqp_sim_step(struct TaqpSim *sim, uint64_t steps);

/**
 * Current tick, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be a live handle or null.
 */
uint64_t taqp_sim_tick(const struct TaqpSim *sim);

/**
 * Largest Euclidean distance of any agent's local copy to the minimizer.
 *
 * # Safety
 * `sim` must be a live handle; `out` writable.
 */
enum TaqpStatus taqp_sim_max_distance(const struct TaqpSim *sim, double *out);

/**
 * Copies agent `agent`'s full local copy into `out[0..len]`.
 *
 * # Safety
 * `sim` must be a live handle; `out` must hold `len` doubles.
 */
enum TaqpStatus taqp_sim_local_copy(const struct TaqpSim *sim,
                                    size_t agent,
                                    double *out,
                                    size_t len);

/**
 * # Safety
 * `sim` must come from this library and not be used afterwards.
 */
void taqp_sim_free(struct TaqpSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAQP_H */
