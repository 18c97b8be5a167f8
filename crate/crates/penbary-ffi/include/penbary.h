/* C interface for the penbary barycenter solvers. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Iteration selector mirrored from the solver crate.
 */
typedef enum PenbarySolverKind {
  PENBARY_SOLVER_KIND_GPM_ARMIJO = 0,
  PENBARY_SOLVER_KIND_GPM_CONST = 1,
  PENBARY_SOLVER_KIND_FIXED_POINT = 2,
} PenbarySolverKind;

/**
 * Status code returned by every fallible function.
 */
typedef enum PenbaryStatus {
  PENBARY_STATUS_OK = 0,
  PENBARY_STATUS_NULL_POINTER = 1,
  PENBARY_STATUS_INVALID_INPUT = 2,
  PENBARY_STATUS_DOMAIN_ERROR = 3,
  PENBARY_STATUS_NUMERICAL_ERROR = 4,
  PENBARY_STATUS_STEPSIZE_FAILURE = 5,
  PENBARY_STATUS_BUFFER_TOO_SMALL = 6,
  PENBARY_STATUS_UTF8_ERROR = 7,
  PENBARY_STATUS_INTERNAL_ERROR = 8,
} PenbaryStatus;

/**
 * Measure family selector for [`penbary_problem_create`].
 */
typedef enum PenbaryFamily {
  PENBARY_FAMILY_GAUSSIAN = 0,
  PENBARY_FAMILY_Q_GAUSSIAN = 1,
  PENBARY_FAMILY_PHI_EXPONENTIAL = 2,
} PenbaryFamily;

/**
 * Opaque handle to a validated problem.
 */
typedef struct PenbaryProblem PenbaryProblem;

/**
 * Opaque handle to a solve outcome.
 */
typedef struct PenbaryReport PenbaryReport;

/**
 * Plain-data solver options; obtain defaults from
 * [`penbary_solver_options_default`] and override fields as needed.
 */
typedef struct PenbarySolverOptions {
  enum PenbarySolverKind kind;
  double tol;
  uintptr_t max_iter;
  double xi;
  double sigma;
  double alpha_hat;
  double beta_hat;
} PenbarySolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *penbary_last_error_message(void);

/**
 * Default solver options: Armijo gradient projection, tol 1e-8,
 * max_iter 100000, xi 0.5, sigma 0.1, box [1e-5, 1e5].
 */
struct PenbarySolverOptions penbary_solver_options_default(void);

/**
 * Builds a problem from raw arrays.
 *
 * `weights` holds `count` values; `matrices` holds `count * dim * dim`
 * values, one row-major `dim x dim` block per input matrix. `q` is read only
 * for the q-Gaussian family. On success `*out` owns the problem; release it
 * with [`penbary_problem_free`].
 *
 * # Safety
 * `weights` and `matrices` must point to arrays of the stated lengths, and
 * `out` must be a valid pointer to a pointer slot.
 */
enum PenbaryStatus penbary_problem_create(enum PenbaryFamily family,
                                          double q,
                                          double gamma,
                                          uintptr_t dim,
                                          uintptr_t count,
                                          const double *weights,
                                          const double *matrices,
                                          struct PenbaryProblem **out);

/**
 * Builds a problem from the JSON problem-file format.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer slot.
 */
enum PenbaryStatus penbary_problem_from_json(const char *json, struct PenbaryProblem **out);

/**
 * Number of rows/columns of the problem's matrices.
 *
 * # Safety
 * `problem` must be a live handle from a `penbary_problem_*` constructor.
 */
uintptr_t penbary_problem_dim(const struct PenbaryProblem *problem);

/**
 * Number of input matrices.
 *
 * # Safety
 * `problem` must be a live handle from a `penbary_problem_*` constructor.
 */
uintptr_t penbary_problem_count(const struct PenbaryProblem *problem);

/**
 * Releases a problem handle; a null pointer is a no-op.
 *
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void penbary_problem_free(struct PenbaryProblem *problem);

/**
 * Solves the problem; on success `*out` owns a report handle.
 *
 * # Safety
 * `problem` must be a live problem handle; `options` null (defaults) or
 * valid; `out` a valid pointer slot.
 */
enum PenbaryStatus penbary_solve(const struct PenbaryProblem *problem,
                                 const struct PenbarySolverOptions *options,
                                 struct PenbaryReport **out);

/**
 * Releases a report handle; a null pointer is a no-op.
 *
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void penbary_report_free(struct PenbaryReport *report);

/**
 * Dimension of the solution matrix.
 *
 * # Safety
 * `report` must be a live report handle.
 */
uintptr_t penbary_report_dim(const struct PenbaryReport *report);

/**
 * Number of update steps taken.
 *
 * # Safety
 * `report` must be a live report handle.
 */
uintptr_t penbary_report_iterations(const struct PenbaryReport *report);

/**
 * Frobenius norm of the optimality-equation defect at the solution.
 *
 * # Safety
 * `report` must be a live report handle.
 */
double penbary_report_residual(const struct PenbaryReport *report);

/**
 * Whether the direction norm reached the tolerance.
 *
 * # Safety
 * `report` must be a live report handle.
 */
bool penbary_report_converged(const struct PenbaryReport *report);

/**
 * Copies the row-major `dim x dim` solution into `out` (`len` must be at
 * least `dim * dim`).
 *
 * # Safety
 * `report` must be a live report handle and `out` must point to `len`
 * writable doubles.
 */
enum PenbaryStatus penbary_report_solution(const struct PenbaryReport *report,
                                           double *out,
                                           uintptr_t len);

/**
 * Number of recorded iterations in the direction-norm trace.
 *
 * # Safety
 * `report` must be a live report handle.
 */
uintptr_t penbary_report_trace_len(const struct PenbaryReport *report);

/**
 * Copies the per-iteration direction norms into `out` (`len` must be at
 * least [`penbary_report_trace_len`]).
 *
 * # Safety
 * `report` must be a live report handle and `out` must point to `len`
 * writable doubles.
 */
enum PenbaryStatus penbary_report_direction_norms(const struct PenbaryReport *report,
                                                  double *out,
                                                  uintptr_t len);

/**
 * Serializes the report as JSON; release the string with
 * [`penbary_string_free`]. Returns null on failure.
 *
 * # Safety
 * `report` must be a live report handle.
 */
char *penbary_report_to_json(const struct PenbaryReport *report);

/**
 * Releases a string returned by this library; a null pointer is a no-op.
 *
 * # Safety
 * `s` must be null or a string obtained from [`penbary_report_to_json`]
 * that has not been freed yet.
 */
void penbary_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
