#ifndef MORREY_LAB_H
#define MORREY_LAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which tail-integral condition to check.
 */
typedef enum MlCondition {
  ML_CONDITION_A = 0,
  ML_CONDITION_B = 1,
} MlCondition;

/**
 * Result codes shared by every entry point.
 */
typedef enum MlStatus {
  ML_STATUS_OK = 0,
  ML_STATUS_NULL_POINTER = 1,
  ML_STATUS_INVALID_UTF8 = 2,
  ML_STATUS_CONFIG = 3,
  ML_STATUS_INVALID_ARGUMENT = 4,
  ML_STATUS_BUDGET_EXCEEDED = 5,
  ML_STATUS_UNKNOWN_ENTRY = 6,
  ML_STATUS_NUMERICAL = 7,
  ML_STATUS_IO = 8,
  ML_STATUS_PANIC = 9,
} MlStatus;

/**
 * A finished experiment report.
 */
typedef struct MlReport MlReport;

/**
 * A weight function `φ(x, r)`.
 */
typedef struct MlWeight MlWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *ml_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *ml_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ml_string_free(char *s);

/**
 * The catalog listing (manufactured problems, weight and kernel families, batteries).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MlStatus ml_catalog(char **out);

/**
 * Parses a TOML config and runs it. When `override_seed` is nonzero `seed` replaces the
 * config's seed. Nothing is written to disk.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MlStatus ml_run_config(const char *config_toml,
                            int override_seed,
                            uint64_t seed,
                            struct MlReport **out);

/**
 * Whether every check passed (1) or not (0).
 *
 * # Safety
 * `report` must be a live handle and `passed` a valid pointer.
 */
enum MlStatus ml_report_passed(const struct MlReport *report, int *passed);

/**
 * Number of checks in the report.
 *
 * # Safety
 * `report` must be a live handle and `count` a valid pointer.
 */
enum MlStatus ml_report_check_count(const struct MlReport *report, size_t *count);

/**
 * Name and verdict of check `index`; the name is caller-owned.
 *
 * # Safety
 * `report` must be a live handle; `name` and `passed` valid pointers.
 */
enum MlStatus ml_report_check(const struct MlReport *report,
                              size_t index,
                              char **name,
                              int *passed);

/**
 * The report as JSON; with `canonical` nonzero the wall-clock field is zeroed.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum MlStatus ml_report_json(const struct MlReport *report, int canonical, char **out);

/**
 * # Safety
 * `report` must come from [`ml_run_config`] and not have been freed. NULL is ignored.
 */
void ml_report_free(struct MlReport *report);

/**
 * `φ(x, r) = r^{β - (n+2)/p}`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MlStatus ml_weight_power(size_t n, double p, double beta, struct MlWeight **out);

/**
 * A weight given by an expression in `x1..xn, t, r`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MlStatus ml_weight_expression(size_t n, double p, const char *source, struct MlWeight **out);

/**
 * `φ(x, r)` with `x` given as `n + 1` coordinates (space, then time).
 *
 * # Safety
 * `weight` must be a live handle, `coords` must hold `len` values, `value` a valid pointer.
 */
enum MlStatus ml_weight_eval(const struct MlWeight *weight,
                             const double *coords,
                             size_t len,
                             double r,
                             double *value);

/**
 * Witnessed constant of a condition at `x = 0`, radii `1e-2 · 2^k`, `k = 0..9`.
 * `divergent` is set to 1 (and `constant` to infinity) when the tail integral diverges.
 *
 * # Safety
 * `weight` must be a live handle; `constant` and `divergent` valid pointers.
 */
enum MlStatus ml_weight_check(const struct MlWeight *weight,
                              enum MlCondition condition,
                              double *constant,
                              int *divergent);

/**
 * # Safety
 * `weight` must come from a `ml_weight_*` constructor and not have been freed. NULL is ignored.
 */
void ml_weight_free(struct MlWeight *weight);

/**
 * The parabolic metrics `ρ` (`rho`) and `ϱ` (`varrho`) of a point given as `n + 1` coordinates.
 *
 * # Safety
 * `coords` must hold `len` values; `rho_out` and `varrho_out` must be valid pointers.
 */
enum MlStatus ml_metrics(const double *coords, size_t len, double *rho_out, double *varrho_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MORREY_LAB_H */
