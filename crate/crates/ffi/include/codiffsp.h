#ifndef CODIFFSP_H
#define CODIFFSP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CspStatus {
  CSP_STATUS_OK = 0,
  CSP_STATUS_NULL_POINTER = 1,
  CSP_STATUS_INVALID_UTF8 = 2,
  CSP_STATUS_PARSE = 3,
  CSP_STATUS_DIM_MISMATCH = 4,
  CSP_STATUS_PROB_SUM = 5,
  CSP_STATUS_PROB_NONPOSITIVE = 6,
  CSP_STATUS_DC_NOT_CONVEX = 7,
  CSP_STATUS_NOT_PSD = 8,
  CSP_STATUS_INVALID_SET = 9,
  CSP_STATUS_INVALID_VALUE = 10,
  CSP_STATUS_NONFINITE = 11,
  CSP_STATUS_VERTEX_CAP = 12,
  CSP_STATUS_INCONSISTENT = 13,
  CSP_STATUS_UNPROJECTABLE = 14,
  CSP_STATUS_NOT_DC = 15,
  CSP_STATUS_NOT_SMOOTH = 16,
  CSP_STATUS_INFEASIBLE_CANDIDATE = 17,
  CSP_STATUS_IO = 18,
  /**
   * The solver stopped without converging; the report is still returned.
   */
  CSP_STATUS_NOT_CONVERGED = 19,
  CSP_STATUS_PANIC = 20,
} CspStatus;

typedef enum CspSolver {
  CSP_SOLVER_DCA = 0,
  CSP_SOLVER_DESCENT = 1,
} CspSolver;

/**
 * Opaque problem handle.
 */
typedef struct CspProblem CspProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses and validates a problem. On success `*out` owns a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CspStatus csp_problem_from_json(const char *json, struct CspProblem **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `problem` must come from this library and not have been freed.
 */
void csp_problem_free(struct CspProblem *problem);

/**
 * Serializes a problem to JSON.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum CspStatus csp_problem_to_json(const struct CspProblem *problem, char **out);

/**
 * Generates a random instance. `dc` and `smooth` are treated as booleans.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CspStatus csp_generate(uint64_t seed,
                            size_t d,
                            size_t m,
                            size_t scenarios,
                            size_t constraints,
                            bool dc,
                            bool smooth,
                            struct CspProblem **out);

/**
 * Objective, `ℓ¹` penalty term and penalty function value at a point.
 *
 * # Safety
 * `problem` must be a live handle, `point_json` a NUL-terminated string and
 * the three outputs valid pointers.
 */
enum CspStatus csp_eval(const struct CspProblem *problem,
                        const char *point_json,
                        double c,
                        double *objective,
                        double *phi,
                        double *penalty_value);

/**
 * Minimizes the `ℓ¹` penalty function. `start_json` may be null for the
 * origin projected onto the first-stage set. The JSON report is written to
 * `*report` also when the status is `NotConverged`.
 *
 * # Safety
 * `problem` must be a live handle, `start_json` null or a NUL-terminated
 * string, and `report` a valid pointer.
 */
enum CspStatus csp_solve(const struct CspProblem *problem,
                         enum CspSolver solver,
                         double c,
                         const char *start_json,
                         char **report);

/**
 * Optimality certificate at a feasible point, as JSON.
 *
 * # Safety
 * `problem` must be a live handle, `point_json` a NUL-terminated string and
 * `certificate` a valid pointer.
 */
enum CspStatus csp_certify(const struct CspProblem *problem,
                           double c,
                           const char *point_json,
                           char **certificate);

/**
 * Sampled nondegeneracy report, as JSON.
 *
 * # Safety
 * `problem` must be a live handle and `report` a valid pointer.
 */
enum CspStatus csp_check_nondeg(const struct CspProblem *problem,
                                size_t samples,
                                uint64_t seed,
                                char **report);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void csp_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *csp_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODIFFSP_H */
