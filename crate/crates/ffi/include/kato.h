#ifndef KATO_H
#define KATO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KatoStatus {
  KATO_STATUS_OK = 0,
  KATO_STATUS_NULL_POINTER = 1,
  KATO_STATUS_INVALID_ARGUMENT = 2,
  KATO_STATUS_PARSE = 3,
  KATO_STATUS_DIMENSION_MISMATCH = 4,
  KATO_STATUS_BUFFER_TOO_SMALL = 5,
  KATO_STATUS_INIT_NOT_IN_RANGE = 6,
  KATO_STATUS_IO = 7,
  KATO_STATUS_SINGULAR_MATRIX = 20,
  KATO_STATUS_RANK_DEFICIENT = 21,
  KATO_STATUS_SPECTRAL_GAP_VIOLATION = 22,
  KATO_STATUS_EMPTY_SUBSPACE = 23,
  KATO_STATUS_DEGENERATE_DUALITY = 24,
  KATO_STATUS_DOMAIN_VIOLATION = 25,
  KATO_STATUS_RANK_COLLAPSE = 26,
  KATO_STATUS_NON_FINITE_STATE = 27,
  KATO_STATUS_NO_CONVERGENCE = 28,
  KATO_STATUS_PANIC = 99,
} KatoStatus;

/**
 * Spectral half-plane selector for [`kato_stable_projector`].
 */
typedef enum KatoHalf {
  KATO_HALF_STABLE = 0,
  KATO_HALF_UNSTABLE = 1,
} KatoHalf;

typedef struct KatoMesh KatoMesh;

typedef struct KatoProblem KatoProblem;

typedef struct KatoReport KatoReport;

typedef struct KatoScheme KatoScheme;

typedef struct KatoComplex {
  double re;
  double im;
} KatoComplex;

typedef struct KatoCounters {
  uint64_t steps;
  /**
   * Projector points consumed, summed over steps.
   */
  uint64_t p_evals;
  /**
   * Fresh family evaluations actually performed.
   */
  uint64_t p_evals_computed;
  uint64_t mat_mults;
} KatoCounters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *kato_last_error(void);

/**
 * Nonzero if `status` denotes a numerical failure (as opposed to bad input).
 */
bool kato_status_is_numerical(enum KatoStatus status);

/**
 * Looks up a problem by id (`moebius`, `rank1`, `evans-toy`,
 * `random:<seed>:<n>:<k>`).
 *
 * # Safety
 * `id` must be a NUL-terminated string; `out` must be writable.
 */
enum KatoStatus kato_problem_new(const char *id, struct KatoProblem **out);

/**
 * # Safety
 * `problem` must come from [`kato_problem_new`] and not be used afterwards.
 */
void kato_problem_free(struct KatoProblem *problem);

/**
 * Ambient dimension `n`, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t kato_problem_dim(const struct KatoProblem *problem);

/**
 * Subspace dimension `k`, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t kato_problem_rank(const struct KatoProblem *problem);

/**
 * Writes `P(lambda)` (n × n, row-major) into `out`.
 *
 * # Safety
 * `problem` must be a live handle; `out` must hold `len` entries.
 */
enum KatoStatus kato_problem_eval(const struct KatoProblem *problem,
                                  struct KatoComplex lambda,
                                  struct KatoComplex *out,
                                  size_t len);

/**
 * Parses a scheme id (`greedy1`, `brz1`, `greedy2`, `rich2`, `rich3`,
 * `greedy3`, `lift:<scheme>`).
 *
 * # Safety
 * `id` must be a NUL-terminated string; `out` must be writable.
 */
enum KatoStatus kato_scheme_new(const char *id, struct KatoScheme **out);

/**
 * # Safety
 * `scheme` must come from [`kato_scheme_new`] and not be used afterwards.
 */
void kato_scheme_free(struct KatoScheme *scheme);

/**
 * Nominal order of accuracy, or 0 for NULL.
 *
 * # Safety
 * `scheme` must be NULL or a live handle.
 */
uint32_t kato_scheme_order(const struct KatoScheme *scheme);

/**
 * Builds a mesh from a contour descriptor such as `circle:0,0:0.5:256`.
 *
 * # Safety
 * `descriptor` must be a NUL-terminated string; `out` must be writable.
 */
enum KatoStatus kato_mesh_new(const char *descriptor, struct KatoMesh **out);

/**
 * The problem's suggested contour, meshed.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum KatoStatus kato_mesh_for_problem(const struct KatoProblem *problem, struct KatoMesh **out);

/**
 * # Safety
 * `mesh` must come from a `kato_mesh_*` constructor and not be used
 * afterwards.
 */
void kato_mesh_free(struct KatoMesh *mesh);

/**
 * Number of mesh points (`L + 1`), or 0 for NULL.
 *
 * # Safety
 * `mesh` must be NULL or a live handle.
 */
size_t kato_mesh_points(const struct KatoMesh *mesh);

/**
 * # Safety
 * `mesh` must be NULL or a live handle.
 */
bool kato_mesh_closed(const struct KatoMesh *mesh);

/**
 * Continues a basis around `mesh`. `r0` is `rows × cols`, row-major; pass
 * NULL for the orthonormal basis of `range P(λ₀)`. With `project` set, an
 * `r0` outside the range is projected onto it instead of rejected.
 *
 * # Safety
 * Handles must be live; `r0` must be NULL or hold `rows * cols` entries;
 * `out` must be writable.
 */
enum KatoStatus kato_continue(const struct KatoProblem *problem,
                              const struct KatoScheme *scheme,
                              const struct KatoMesh *mesh,
                              const struct KatoComplex *r0,
                              size_t rows,
                              size_t cols,
                              bool project,
                              struct KatoReport **out);

/**
 * # Safety
 * `report` must come from [`kato_continue`] and not be used afterwards.
 */
void kato_report_free(struct KatoReport *report);

/**
 * Number of frames (`L + 1`), or 0 for NULL.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
size_t kato_report_frames(const struct KatoReport *report);

/**
 * Writes `|R_L - R_0|_F`. Fails with `InvalidArgument` on an open mesh.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum KatoStatus kato_report_closure_error(const struct KatoReport *report, double *out);

/**
 * Writes the absolute and relative drift `max_j |P_j R_j - R_j|_F`.
 *
 * # Safety
 * `report` must be a live handle; `drift` and `drift_rel` must be writable.
 */
enum KatoStatus kato_report_drift(const struct KatoReport *report,
                                  double *drift,
                                  double *drift_rel);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum KatoStatus kato_report_counters(const struct KatoReport *report, struct KatoCounters *out);

/**
 * Copies frame `index` (its point `λ_j` and the `n × k` basis, row-major).
 *
 * # Safety
 * `report` must be a live handle; `lambda` must be writable; `out` must
 * hold `len` entries.
 */
enum KatoStatus kato_report_frame(const struct KatoReport *report,
                                  size_t index,
                                  struct KatoComplex *lambda,
                                  struct KatoComplex *out,
                                  size_t len);

/**
 * Spectral projector of the `n × n` matrix `a` (row-major) onto the
 * invariant subspace of the chosen half-plane. Writes the projector into
 * `out` and its rank into `rank`.
 *
 * # Safety
 * `a` must hold `n * n` entries, `out` must hold `len` entries, `rank`
 * must be writable.
 */
enum KatoStatus kato_stable_projector(const struct KatoComplex *a,
                                      size_t n,
                                      enum KatoHalf half,
                                      struct KatoComplex *out,
                                      size_t len,
                                      size_t *rank);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KATO_H */
