#ifndef CEXFORGE_H
#define CEXFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CexStatus {
  CEX_STATUS_OK = 0,
  CEX_STATUS_NULL_ARGUMENT = 1,
  CEX_STATUS_INVALID_UTF8 = 2,
  CEX_STATUS_IO = 3,
  CEX_STATUS_PARSE = 4,
  CEX_STATUS_INVALID_MODEL = 5,
  CEX_STATUS_INVALID_ARGUMENT = 6,
  CEX_STATUS_INVALID_STATE = 7,
  CEX_STATUS_SOLVER = 8,
  CEX_STATUS_PANIC = 9,
} CexStatus;

typedef enum CexComparison {
  CEX_COMPARISON_LESS_EQ = 0,
  CEX_COMPARISON_LESS = 1,
} CexComparison;

typedef enum CexMethod {
  CEX_METHOD_GLOBAL = 0,
  CEX_METHOD_LOCAL = 1,
} CexMethod;

// Refinement state of a session.
typedef enum CexSessionStatus {
  CEX_SESSION_STATUS_SATISFIED = 0,
  CEX_SESSION_STATUS_SEARCHING = 1,
  CEX_SESSION_STATUS_CRITICAL = 2,
  CEX_SESSION_STATUS_BUDGET_EXHAUSTED = 3,
} CexSessionStatus;

typedef enum CexRefinePolicy {
  CEX_REFINE_POLICY_MASS_GREEDY = 0,
  CEX_REFINE_POLICY_EXPAND_ALL = 1,
} CexRefinePolicy;

// Opaque model handle.
typedef struct CexModel CexModel;

// Opaque session handle. Not thread-safe; use one thread at a time.
typedef struct CexSession CexSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next library call on the same thread; do not free.
const char *cex_last_error(void);

// Library version as a static string; do not free.
const char *cex_version(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void cex_string_free(char *s);

// Parses a model from `.tra` and `.lab` text.
//
// # Safety
// String arguments must be valid NUL-terminated strings; `out` must be writable.
enum CexStatus cex_model_from_text(const char *tra,
                                   const char *lab,
                                   bool one_based,
                                   struct CexModel **out);

// Reads a model from `.tra` and `.lab` files.
//
// # Safety
// Path arguments must be valid NUL-terminated strings; `out` must be writable.
enum CexStatus cex_model_from_files(const char *tra_path,
                                    const char *lab_path,
                                    bool one_based,
                                    struct CexModel **out);

// # Safety
// `model` must be null or a live handle.
size_t cex_model_num_states(const struct CexModel *model);

// # Safety
// `model` must be null or a live handle.
size_t cex_model_num_transitions(const struct CexModel *model);

// # Safety
// `model` must be null or a handle not yet freed. Sessions created from it stay valid.
void cex_model_free(struct CexModel *model);

// Computes the probability of reaching `target` and whether the bound is broken.
//
// # Safety
// Pointers must be valid; `out_prob` and `out_violated` must be writable.
enum CexStatus cex_check(const struct CexModel *model,
                         const char *target,
                         enum CexComparison comparison,
                         double threshold,
                         double *out_prob,
                         bool *out_violated);

// Opens a refinement session. A property that holds yields a session in
// the `Satisfied` state. `max_steps == 0` selects the default budget.
//
// # Safety
// Pointers must be valid; `out` must be writable.
enum CexStatus cex_session_create(const struct CexModel *model,
                                  const char *target,
                                  enum CexComparison comparison,
                                  double threshold,
                                  enum CexMethod method,
                                  size_t max_steps,
                                  struct CexSession **out);

// Rebuilds a session from exported JSON.
//
// # Safety
// `json` must be a valid string; `out` must be writable.
enum CexStatus cex_session_import_json(const char *json, struct CexSession **out);

// # Safety
// `session` must be null or a handle not yet freed.
void cex_session_free(struct CexSession *session);

// # Safety
// `session` must be a live handle; `out` must be writable.
enum CexStatus cex_session_status(const struct CexSession *session, enum CexSessionStatus *out);

// Probability of the current subsystem (0 when empty).
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum CexStatus cex_session_prob(const struct CexSession *session, double *out);

// # Safety
// `session` must be a live handle.
enum CexStatus cex_session_search(struct CexSession *session);

// Expands the given hierarchy nodes (parents first).
//
// # Safety
// `session` must be a live handle; `nodes` must point to `len` values (or be null with `len == 0`).
enum CexStatus cex_session_concretize(struct CexSession *session, const size_t *nodes, size_t len);

// # Safety
// `session` must be a live handle.
enum CexStatus cex_session_auto_refine(struct CexSession *session, enum CexRefinePolicy policy);

// # Safety
// `session` must be a live handle.
enum CexStatus cex_session_undo(struct CexSession *session);

// # Safety
// `session` must be a live handle.
enum CexStatus cex_session_reset(struct CexSession *session);

// JSON report; wall time is 0 when `deterministic` is set. Free with `cex_string_free`.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum CexStatus cex_session_report_json(const struct CexSession *session,
                                       bool deterministic,
                                       char **out);

// Session export document. Free with `cex_string_free`.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum CexStatus cex_session_export_json(const struct CexSession *session, char **out);

// Current subsystem in `.tra` form over concrete state ids. Free with `cex_string_free`.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum CexStatus cex_session_subsystem_tra(const struct CexSession *session, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CEXFORGE_H */
