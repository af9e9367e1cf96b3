#ifndef LIFTCHECK_H
#define LIFTCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum LcCommand {
  LC_COMMAND_VERIFY_CONNECTION = 0,
  LC_COMMAND_CLASSIFY = 1,
  LC_COMMAND_CHECK_CLOSED = 2,
  LC_COMMAND_FULL = 3,
} LcCommand;

// Which engine produces a derivative: the closed forms with the corrected
// reading, the closed forms without the index and sign corrections, or the induced-coordinate
// oracle.
typedef enum LcEngine {
  LC_ENGINE_CLOSED_FORM = 0,
  LC_ENGINE_UNCORRECTED = 1,
  LC_ENGINE_ORACLE = 2,
} LcEngine;

typedef enum LcLiftKind {
  LC_LIFT_KIND_VERTICAL = 0,
  LC_LIFT_KIND_COMPLETE = 1,
  LC_LIFT_KIND_HORIZONTAL = 2,
} LcLiftKind;

typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_ARGUMENT = 1,
  LC_STATUS_INVALID_UTF8 = 2,
  LC_STATUS_IO = 3,
  LC_STATUS_PARSE = 4,
  LC_STATUS_UNKNOWN_FIELD = 5,
  LC_STATUS_DIMENSION_MISMATCH = 6,
  LC_STATUS_BUFFER_TOO_SMALL = 7,
  LC_STATUS_NUMERIC = 8,
  LC_STATUS_INVALID_ARGUMENT = 9,
  LC_STATUS_PANIC = 10,
} LcStatus;

// A parsed chart with its fields. Opaque to C.
typedef struct LcSpec LcSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library as a static NUL-terminated string.
const char *lc_version(void);

// Message of the last failed call on this thread, or NULL after a success.
// Valid until the next call into the library on the same thread.
const char *lc_last_error(void);

// Parse a spec from its text. `name` may be NULL; it names the chart when
// the text does not.
//
// # Safety
// `text` and a non-NULL `name` must be NUL-terminated; `out` must be writable.
enum LcStatus lc_spec_from_text(const char *text, const char *name, struct LcSpec **out);

// Load a spec file.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum LcStatus lc_spec_from_path(const char *path, struct LcSpec **out);

// Release a spec. NULL is ignored.
//
// # Safety
// `spec` must come from `lc_spec_from_*` and not be used afterwards.
void lc_spec_free(struct LcSpec *spec);

// Chart dimension, or 0 for NULL.
//
// # Safety
// `spec` must be NULL or a live handle.
size_t lc_spec_dim(const struct LcSpec *spec);

// Number of declared vector fields, or 0 for NULL.
//
// # Safety
// `spec` must be NULL or a live handle.
size_t lc_spec_field_count(const struct LcSpec *spec);

// Name of the vector field at `index`, owned by the handle; NULL when out of
// range.
//
// # Safety
// `spec` must be NULL or a live handle.
const char *lc_spec_field_name(const struct LcSpec *spec, size_t index);

// Christoffel symbols `Γ^h_{ji}` at `x`, `n³` values indexed `[h][j][i]`.
//
// # Safety
// `x` holds `n` doubles; `out` holds `out_len` doubles.
enum LcStatus lc_christoffel(const struct LcSpec *spec,
                             const double *x,
                             size_t n,
                             double *out,
                             size_t out_len);

// Curvature `R^h_{kji}` at `x`, `n⁴` values indexed `[h][k][j][i]`.
//
// # Safety
// `x` holds `n` doubles; `out` holds `out_len` doubles.
enum LcStatus lc_riemann(const struct LcSpec *spec,
                         const double *x,
                         size_t n,
                         double *out,
                         size_t out_len);

// Adapted-frame connection at `(x, y)`: `8·n³` values, eight `[h][j][i]`
// arrays in the order h_ji, h_jbi, h_bji, h_bjbi, bh_ji, bh_jbi, bh_bji,
// bh_bjbi (`b` marks a fiber index). `engine` is an `LcEngine`; both closed
// form engines give the same table.
//
// # Safety
// `x` and `y` hold `n` doubles; `out` holds `out_len` doubles.
enum LcStatus lc_connection(const struct LcSpec *spec,
                            uint32_t engine,
                            const double *x,
                            const double *y,
                            size_t n,
                            double *out,
                            size_t out_len);

// Lie derivative of the metric along a lift of `field`, adapted frame,
// `(2n)²` values row-major with base indices first. `kind` is an
// `LcLiftKind`, `engine` an `LcEngine`.
//
// # Safety
// `field` is NUL-terminated; `x` and `y` hold `n` doubles; `out` holds
// `out_len` doubles.
enum LcStatus lc_lie_derivative(const struct LcSpec *spec,
                                const char *field,
                                uint32_t kind,
                                uint32_t engine,
                                const double *x,
                                const double *y,
                                size_t n,
                                double *out,
                                size_t out_len);

// Covariant derivative `∇_γ X^α` of a lift of `field`, adapted frame,
// `(2n)²` values row-major in `(γ, α)`.
//
// # Safety
// As for `lc_lie_derivative`.
enum LcStatus lc_covariant_derivative(const struct LcSpec *spec,
                                      const char *field,
                                      uint32_t kind,
                                      uint32_t engine,
                                      const double *x,
                                      const double *y,
                                      size_t n,
                                      double *out,
                                      size_t out_len);

// Run a check suite and return its JSON report through `json_out` (release
// with `lc_string_free`). `command` is an `LcCommand`; `field` may be NULL
// for all fields; `tol` below zero keeps the built-in tolerances. `passed`
// (may be NULL) receives 1 when every check passed and no
// counterexample candidate was found, else 0.
//
// # Safety
// Non-NULL pointers must be valid for their documented use.
enum LcStatus lc_run_check(const struct LcSpec *spec,
                           uint32_t command,
                           const char *field,
                           size_t points,
                           uint64_t seed,
                           double tol,
                           char **json_out,
                           int32_t *passed);

// Release a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void lc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIFTCHECK_H */
