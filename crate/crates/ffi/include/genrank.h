#ifndef GENRANK_H
#define GENRANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum GrStatus {
  GR_STATUS_OK = 0,
  GR_STATUS_NULL_POINTER = 1,
  GR_STATUS_INVALID_ARGUMENT = 2,
  // Input failed graph, damping or count validation.
  GR_STATUS_INVALID_INPUT = 3,
  // An iterative solve hit its iteration cap.
  GR_STATUS_NOT_CONVERGED = 4,
  GR_STATUS_BUFFER_TOO_SMALL = 5,
  // Dense factorization failed or the model is too large for it.
  GR_STATUS_SOLVER_FAILURE = 6,
  GR_STATUS_PANIC = 7,
} GrStatus;

typedef enum GrDangling {
  GR_DANGLING_SELF_SINK = 0,
  GR_DANGLING_UNIFORM = 1,
} GrDangling;

typedef enum GrAveraging {
  GR_AVERAGING_FULL_N = 0,
  GR_AVERAGING_EXCLUDE_DIAGONAL = 1,
} GrAveraging;

typedef enum GrZeroVisit {
  GR_ZERO_VISIT_SINK = 0,
  GR_ZERO_VISIT_UNIFORM = 1,
} GrZeroVisit;

// Opaque visit counts.
typedef struct GrCounts GrCounts;

// Opaque generalized model `(W, A)`.
typedef struct GrModel GrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Human-readable name of a status code. The string is static.
const char *gr_status_string(enum GrStatus status);

// Message of the last failure on this thread, or NULL if none. The pointer
// stays valid until the next failing call on the same thread.
const char *gr_last_error_message(void);

// Builds a model from `len` weighted edges over `n` nodes, normalizing
// rows and deriving damping by the coupling rule with clamp bound `eps`.
//
// # Safety
// `sources`, `targets` and `weights` must each point to `len` readable
// values (or may be NULL when `len` is 0). `out` must be writable.
enum GrStatus gr_model_from_edges(const size_t *sources,
                                  const size_t *targets,
                                  const double *weights,
                                  size_t len,
                                  size_t n,
                                  enum GrDangling dangling,
                                  double eps,
                                  struct GrModel **out);

// Replaces the damping with `alpha` on every node.
//
// # Safety
// `model` must be a live handle.
enum GrStatus gr_model_set_scalar_damping(struct GrModel *model, double alpha);

// Replaces the damping with the `len` values at `values`, each of which
// must lie in `[eps, 1 - eps]`.
//
// # Safety
// `model` must be a live handle and `values` must point to `len` doubles.
enum GrStatus gr_model_set_damping(struct GrModel *model,
                                   const double *values,
                                   size_t len,
                                   double eps);

// Node count of the model, or 0 for a NULL handle.
//
// # Safety
// `model` must be NULL or a live handle.
size_t gr_model_n(const struct GrModel *model);

// Copies the damping values into `out`.
//
// # Safety
// `model` must be a live handle and `out` must have room for `len` doubles.
enum GrStatus gr_model_damping(const struct GrModel *model, double *out, size_t len);

// # Safety
// `model` must be NULL or a handle not yet freed.
void gr_model_free(struct GrModel *model);

// Writes `V` row-major into `out`, which must hold `n * n` doubles.
//
// # Safety
// `model` must be a live handle and `out` must have room for `len` doubles.
enum GrStatus gr_total_effects_dense(const struct GrModel *model, double *out, size_t len);

// Centrality by the dense route, with either averaging mode.
//
// # Safety
// `model` must be a live handle and `out` must have room for `len` doubles.
enum GrStatus gr_centrality_dense(const struct GrModel *model,
                                  enum GrAveraging mode,
                                  bool renormalize,
                                  double *out,
                                  size_t len);

// Centrality by the sparse fixed-point route. `iterations` may be NULL.
//
// # Safety
// `model` must be a live handle, `out` must have room for `len` doubles and
// `iterations` must be NULL or writable.
enum GrStatus gr_centrality_iterative(const struct GrModel *model,
                                      double tol,
                                      size_t max_iters,
                                      double *out,
                                      size_t len,
                                      size_t *iterations);

// Classical PageRank on the model's `W` with scalar damping `alpha`; the
// model's own damping is ignored. `iterations` may be NULL.
//
// # Safety
// As for [`gr_centrality_iterative`].
enum GrStatus gr_classical_pagerank(const struct GrModel *model,
                                    double alpha,
                                    double tol,
                                    size_t max_iters,
                                    double *out,
                                    size_t len,
                                    size_t *iterations);

// Counts sessions stored back to back in `pages`; session `k` has
// `lengths[k]` pages.
//
// # Safety
// `pages` must point to `pages_len` values, `lengths` to `n_sessions`
// values, and `out` must be writable.
enum GrStatus gr_counts_from_sessions(const size_t *pages,
                                      size_t pages_len,
                                      const size_t *lengths,
                                      size_t n_sessions,
                                      size_t n,
                                      struct GrCounts **out);

// Adds `src` into `dst`.
//
// # Safety
// Both must be live handles.
enum GrStatus gr_counts_merge(struct GrCounts *dst, const struct GrCounts *src);

// # Safety
// `counts` must be NULL or a handle not yet freed.
void gr_counts_free(struct GrCounts *counts);

// Estimates a coupled model from visit counts.
//
// # Safety
// `counts` must be a live handle and `out` must be writable.
enum GrStatus gr_model_estimate(const struct GrCounts *counts,
                                enum GrZeroVisit zero_visit,
                                double eps,
                                struct GrModel **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENRANK_H */
