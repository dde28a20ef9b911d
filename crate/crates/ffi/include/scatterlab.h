#ifndef SCATTERLAB_H
#define SCATTERLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScatterlabStatus {
  SCATTERLAB_STATUS_OK = 0,
  SCATTERLAB_STATUS_NULL_POINTER = 1,
  SCATTERLAB_STATUS_INVALID_STRING = 2,
  SCATTERLAB_STATUS_VALIDATION = 3,
  SCATTERLAB_STATUS_NUMERICAL = 4,
  SCATTERLAB_STATUS_PHYSICS = 5,
  SCATTERLAB_STATUS_IO = 6,
  SCATTERLAB_STATUS_BUFFER_TOO_SMALL = 7,
  SCATTERLAB_STATUS_PANIC = 8,
} ScatterlabStatus;

// Run configuration.
typedef struct ScatterlabConfig ScatterlabConfig;

// Dispersion relations of both particle species.
typedef struct ScatterlabDispersion ScatterlabDispersion;

// Matrix-product state.
typedef struct ScatterlabState ScatterlabState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *scatterlab_last_error(void);

// Library version as a static NUL-terminated string.
const char *scatterlab_version(void);

// Parses and validates a TOML configuration.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum ScatterlabStatus scatterlab_config_from_toml(const char *text, struct ScatterlabConfig **out);

// Reads and validates a TOML configuration file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ScatterlabStatus scatterlab_config_load(const char *path, struct ScatterlabConfig **out);

// # Safety
// `cfg` must be null or a handle from this library not yet freed.
void scatterlab_config_free(struct ScatterlabConfig *cfg);

// Number of lattice sites.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_config_length(const struct ScatterlabConfig *cfg, size_t *out);

// Sets the incoming momentum, in units of π, of the left packet.
//
// # Safety
// `cfg` must be a live handle.
enum ScatterlabStatus scatterlab_config_set_momentum(struct ScatterlabConfig *cfg,
                                                     double k_over_pi);

// Ground state of the configured chain. `energy` may be null.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_vacuum(const struct ScatterlabConfig *cfg,
                                        struct ScatterlabState **out,
                                        double *energy);

// Prepares two packets on `vacuum` and evolves them to `evolution.t_end`.
//
// # Safety
// `cfg` and `vacuum` must be live handles and `out` a valid pointer.
enum ScatterlabStatus scatterlab_scatter(const struct ScatterlabConfig *cfg,
                                         const struct ScatterlabState *vacuum,
                                         struct ScatterlabState **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ScatterlabStatus scatterlab_state_load(const char *path, struct ScatterlabState **out);

// # Safety
// `state` must be a live handle and `path` a NUL-terminated string.
enum ScatterlabStatus scatterlab_state_save(const struct ScatterlabState *state, const char *path);

// # Safety
// `state` must be null or a handle from this library not yet freed.
void scatterlab_state_free(struct ScatterlabState *state);

// # Safety
// `state` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_state_length(const struct ScatterlabState *state, size_t *out);

// # Safety
// `state` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_state_norm_sq(const struct ScatterlabState *state, double *out);

// Schmidt values across the bond right of `cut_site`, in descending order.
//
// Writes the number of values to `written`. When `capacity` is too small
// nothing is copied, `written` holds the required size and the call returns
// `BufferTooSmall`.
//
// # Safety
// `state` must be a live handle, `values` valid for `capacity` doubles (or
// null with zero capacity) and `written` a valid pointer.
enum ScatterlabStatus scatterlab_state_schmidt_values(const struct ScatterlabState *state,
                                                      size_t cut_site,
                                                      double *values,
                                                      size_t capacity,
                                                      size_t *written);

// Von Neumann entropy (natural log) of a spectrum of Schmidt values λ.
//
// # Safety
// `values` must be valid for `len` doubles and `out` a valid pointer.
enum ScatterlabStatus scatterlab_entanglement_entropy(const double *values,
                                                      size_t len,
                                                      double *out);

// Antiflatness of a spectrum padded with zeros to `chi` values.
//
// # Safety
// `values` must be valid for `len` doubles and `out` a valid pointer.
enum ScatterlabStatus scatterlab_antiflatness(const double *values,
                                              size_t len,
                                              size_t chi,
                                              double *out);

// Dispersion relations from exact diagonalization.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_dispersion(const struct ScatterlabConfig *cfg,
                                            struct ScatterlabDispersion **out);

// # Safety
// `table` must be null or a handle from this library not yet freed.
void scatterlab_dispersion_free(struct ScatterlabDispersion *table);

// Energy of species 1 or 2 at momentum `k` (radians).
//
// # Safety
// `table` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_dispersion_energy(const struct ScatterlabDispersion *table,
                                                   uint8_t species_id,
                                                   double k,
                                                   double *out);

// Group velocity of species 1 or 2 at momentum `k` (radians).
//
// # Safety
// `table` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_dispersion_velocity(const struct ScatterlabDispersion *table,
                                                     uint8_t species_id,
                                                     double k,
                                                     double *out);

// Rest mass of species 1 or 2.
//
// # Safety
// `table` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_dispersion_mass(const struct ScatterlabDispersion *table,
                                                 uint8_t species_id,
                                                 double *out);

// Smallest incoming momentum (radians) at which two light particles can
// produce a heavy one.
//
// # Safety
// `table` must be a live handle and `out` a valid pointer.
enum ScatterlabStatus scatterlab_dispersion_threshold(const struct ScatterlabDispersion *table,
                                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCATTERLAB_H */
