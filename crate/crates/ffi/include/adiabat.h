#ifndef ADIABAT_H
#define ADIABAT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdiabatStatus {
  ADIABAT_STATUS_OK = 0,
  ADIABAT_STATUS_NULL_POINTER = 1,
  ADIABAT_STATUS_INVALID_ARGUMENT = 2,
  ADIABAT_STATUS_UNKNOWN_SPACE = 3,
  ADIABAT_STATUS_DOMAIN = 4,
  ADIABAT_STATUS_NOT_STRICT = 5,
  ADIABAT_STATUS_NUMERICAL = 6,
  ADIABAT_STATUS_INFEASIBLE = 7,
  ADIABAT_STATUS_IO = 8,
  ADIABAT_STATUS_PANIC = 9,
} AdiabatStatus;

typedef enum AdiabatUnits {
  ADIABAT_UNITS_REDUCED = 0,
  ADIABAT_UNITS_SI = 1,
} AdiabatUnits;

/**
 * Opaque handle to a derived registry.
 */
typedef struct AdiabatRegistry AdiabatRegistry;

/**
 * A simple state `(U, V)` of `scale` units of matter in space `space`.
 */
typedef struct AdiabatState {
  const char *space;
  double scale;
  double energy;
  double volume;
} AdiabatState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *adiabat_last_error(void);

/**
 * Static, NUL-terminated version string.
 */
const char *adiabat_version(void);

/**
 * Derives one of the bundled registries.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum AdiabatStatus adiabat_registry_bundled(enum AdiabatUnits units, struct AdiabatRegistry **out);

/**
 * Parses and derives a registry from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for a pointer write.
 */
enum AdiabatStatus adiabat_registry_from_json(const char *json, struct AdiabatRegistry **out);

/**
 * Releases a registry. Null is ignored.
 *
 * # Safety
 * `registry` must come from this library and not be used afterwards.
 */
void adiabat_registry_free(struct AdiabatRegistry *registry);

/**
 * Number of spaces in the registry.
 *
 * # Safety
 * `registry` must be a live handle and `out` valid for a write.
 */
enum AdiabatStatus adiabat_registry_len(const struct AdiabatRegistry *registry, size_t *out);

/**
 * Absolute temperature at empirical temperature `theta`.
 *
 * # Safety
 * Pointers must be valid; `space` NUL-terminated.
 */
enum AdiabatStatus adiabat_temperature(const struct AdiabatRegistry *registry,
                                       const char *space,
                                       double theta,
                                       double *out);

/**
 * Entropy of a state, with scale 1 and offset 0 in every space.
 *
 * # Safety
 * Pointers must be valid; the state's space NUL-terminated.
 */
enum AdiabatStatus adiabat_entropy(const struct AdiabatRegistry *registry,
                                   const struct AdiabatState *state,
                                   double *out);

/**
 * Energy reached by following the adiabat through `state` to volume `volume`.
 *
 * # Safety
 * Pointers must be valid; the state's space NUL-terminated.
 */
enum AdiabatStatus adiabat_adiabat_energy(const struct AdiabatRegistry *registry,
                                          const struct AdiabatState *state,
                                          double volume,
                                          double *out);

/**
 * Compares two compound states with the operational oracle. `forward` is set
 * when `a` precedes `b`, `backward` when `b` precedes `a`.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` states; output pointers must be valid.
 */
enum AdiabatStatus adiabat_compare(const struct AdiabatRegistry *registry,
                                   const struct AdiabatState *a,
                                   size_t na,
                                   const struct AdiabatState *b,
                                   size_t nb,
                                   int *forward,
                                   int *backward);

/**
 * Entropy of `x` on the scale with `x0` at 0 and `x1` at 1, found from the
 * order relation alone to within `tol`.
 *
 * # Safety
 * State pointers must be valid; output pointers must be valid.
 */
enum AdiabatStatus adiabat_reconstruct(const struct AdiabatRegistry *registry,
                                       const struct AdiabatState *x0,
                                       const struct AdiabatState *x1,
                                       const struct AdiabatState *x,
                                       double tol,
                                       double *lambda_minus,
                                       double *lambda_plus);

/**
 * Shares `total_energy` between `n` systems at fixed volumes so that they end
 * at one temperature. Writes the common empirical temperature and each
 * system's energy into `energies` (length `n`).
 *
 * # Safety
 * `states` must point to `n` states and `energies` to `n` writable doubles.
 */
enum AdiabatStatus adiabat_equilibrate(const struct AdiabatRegistry *registry,
                                       const struct AdiabatState *states,
                                       size_t n,
                                       double total_energy,
                                       double *theta,
                                       double *energies);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADIABAT_H */
