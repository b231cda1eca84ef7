#ifndef NUMFIX_H
#define NUMFIX_H

/* Generated by cbindgen; do not edit. */

#include <stdint.h>

/**
 * Status codes; 0..=5 coincide with the command-line exit codes.
 */
typedef enum NumfixStatus {
  NUMFIX_STATUS_OK = 0,
  /**
   * `numfix_check` found violations (the report is still written).
   */
  NUMFIX_STATUS_INCONSISTENT = 1,
  /**
   * Syntax, schema, type, data or I/O error.
   */
  NUMFIX_STATUS_INVALID_INPUT = 2,
  /**
   * The method does not apply to the constraints or query.
   */
  NUMFIX_STATUS_UNSUPPORTED = 3,
  NUMFIX_STATUS_CAP_EXCEEDED = 4,
  NUMFIX_STATUS_NO_FIX = 5,
  NUMFIX_STATUS_NULL_POINTER = 10,
  NUMFIX_STATUS_INVALID_UTF8 = 11,
  /**
   * A panic was caught at the boundary.
   */
  NUMFIX_STATUS_INTERNAL = 12,
} NumfixStatus;

/**
 * Opaque handle.
 */
typedef struct NumfixSession NumfixSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a session from schema text, constraint text (NULL for none) and a
 * directory holding one `<relation>.csv` per relation.
 *
 * # Safety
 * String arguments must be NULL or NUL-terminated; `out` must be writable.
 */
enum NumfixStatus numfix_session_new(const char *schema_text,
                                     const char *ic_text,
                                     const char *data_dir,
                                     struct NumfixSession **out);

/**
 * # Safety
 * `session` must come from `numfix_session_new` and not be freed twice.
 */
void numfix_session_free(struct NumfixSession *session);

/**
 * Caps exact-search nodes and grid points per tuple.
 *
 * # Safety
 * `session` must be a live handle or NULL.
 */
enum NumfixStatus numfix_session_set_max_grid(struct NumfixSession *session, uint64_t points);

/**
 * Constraint satisfaction report; `Inconsistent` when violated.
 *
 * # Safety
 * `session` must be a live handle; `out` must be writable.
 */
enum NumfixStatus numfix_check(const struct NumfixSession *session, char **out);

/**
 * Fixes by `method` (`exact`, `greedy`, `primal-dual`, `1ad`). `k` (NULL
 * for none) is a distance threshold such as `"10"` or `"1/10"`; with
 * `out_dir` non-NULL each fix is written to `out_dir/fix-<n>/`.
 *
 * # Safety
 * String arguments must be NULL or NUL-terminated; `out` must be writable.
 */
enum NumfixStatus numfix_fix(const struct NumfixSession *session,
                             const char *method,
                             const char *k,
                             const char *out_dir,
                             char **out);

/**
 * Consistent answers under `semantics` (`skeptical`, `brave`, `majority`,
 * `range`); `k` (NULL for none) is the range threshold.
 *
 * # Safety
 * String arguments must be NULL or NUL-terminated; `out` must be writable.
 */
enum NumfixStatus numfix_cqa(const struct NumfixSession *session,
                             const char *query,
                             const char *semantics,
                             const char *k,
                             char **out);

/**
 * Constraint classes and locality; with `query` non-NULL, its join graph.
 *
 * # Safety
 * `query` must be NULL or NUL-terminated; `out` must be writable.
 */
enum NumfixStatus numfix_classify(const struct NumfixSession *session,
                                  const char *query,
                                  char **out);

/**
 * Approximate largest value of a scalar `sum` query across fixes.
 *
 * # Safety
 * `query` must be NUL-terminated; `out` must be writable.
 */
enum NumfixStatus numfix_approx_sum(const struct NumfixSession *session,
                                    const char *query,
                                    char **out);

/**
 * Per-tuple candidates under one-atom denials.
 *
 * # Safety
 * `session` must be a live handle; `out` must be writable.
 */
enum NumfixStatus numfix_reduce_1ad(const struct NumfixSession *session, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void numfix_string_free(char *s);

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *numfix_last_error(void);

/**
 * Library version, statically allocated.
 */
const char *numfix_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NUMFIX_H */
