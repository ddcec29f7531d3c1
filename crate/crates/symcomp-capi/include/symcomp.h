#ifndef SYMCOMP_H
#define SYMCOMP_H

#include <stdint.h>
#include <stddef.h>


/**
 * Status codes shared with the CLI's exit codes.
 */
typedef enum SymcompStatus {
  /**
   * Success; for queries: the goal is derivable.
   */
  SYMCOMP_STATUS_OK = 0,
  /**
   * A query goal was not derivable, or a suite reported a failure.
   */
  SYMCOMP_STATUS_NEGATIVE = 1,
  /**
   * Bad input: unreadable file, parse error, unknown name.
   */
  SYMCOMP_STATUS_INPUT_ERROR = 2,
  /**
   * A search or enumeration budget was exhausted.
   */
  SYMCOMP_STATUS_BUDGET_EXCEEDED = 3,
} SymcompStatus;

/**
 * Opaque scenario handle.
 */
typedef struct SymcompScenario SymcompScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version string; static storage, do not free.
 */
const char *symcomp_version(void);

/**
 * Message for the most recent error on this thread; static storage
 * managed by the library, do not free.
 */
const char *symcomp_last_error(void);

/**
 * Loads a scenario file. Returns null on failure; see
 * `symcomp_last_error`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct SymcompScenario *symcomp_scenario_load(const char *path);

/**
 * Parses a scenario from memory. `resolve_dir` is the directory for the
 * `program` key, or null for the current directory.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `resolve_dir` may be null.
 */
struct SymcompScenario *symcomp_scenario_parse(const char *text, const char *resolve_dir);

/**
 * Releases a scenario handle.
 *
 * # Safety
 * `scn` must come from a `symcomp_scenario_*` constructor, at most once.
 */
void symcomp_scenario_free(struct SymcompScenario *scn);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from a symcomp function that transfers ownership.
 */
void symcomp_string_free(char *s);

/**
 * Extracts the process model. On success writes a malloc'd string to
 * `out` and returns `Ok`.
 *
 * # Safety
 * `scn` must be a live scenario handle and `out` a valid pointer.
 */
enum SymcompStatus symcomp_extract(const struct SymcompScenario *scn, char **out);

/**
 * Runs a knowledge query such as `K(R0)`. `combiner` may be null to use
 * the scenario's choice. Writes the verdict text (and proof, when
 * derivable) to `out` when `out` is non-null.
 *
 * # Safety
 * `scn` must be a live scenario handle; `goal` a valid string; `out` may
 * be null.
 */
enum SymcompStatus symcomp_query(const struct SymcompScenario *scn,
                                 const char *goal,
                                 const char *combiner,
                                 char **out);

/**
 * Runs a named property suite (`thm1`, `sym-assoc`, `thm3`,
 * `refinement`, `freshness`, `concrete`). Writes the textual report to
 * `out` when non-null; returns `Ok` when every case passed.
 *
 * # Safety
 * `suite` must be a valid string; `out` may be null.
 */
enum SymcompStatus symcomp_check(const char *suite, uint64_t seed, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYMCOMP_H */
