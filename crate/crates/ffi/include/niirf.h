#ifndef NIIRF_H
#define NIIRF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum NiirfStatus {
  NIIRF_STATUS_OK = 0,
  NIIRF_STATUS_NULL_POINTER = 1,
  NIIRF_STATUS_INVALID_ARGUMENT = 2,
  NIIRF_STATUS_BUFFER_TOO_SMALL = 3,
  NIIRF_STATUS_IO = 4,
  NIIRF_STATUS_FORMAT = 5,
  NIIRF_STATUS_DOMAIN = 6,
  NIIRF_STATUS_UNSUPPORTED = 7,
  NIIRF_STATUS_PANIC = 8,
} NiirfStatus;

/**
 * HRTF measurements of every subject in a container file.
 */
typedef struct NiirfContainer NiirfContainer;

/**
 * A trained field loaded from a checkpoint.
 */
typedef struct NiirfModel NiirfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *niirf_version(void);

/**
 * Message of the last failed call on this thread (empty after a success). Valid until the
 * next call on the same thread.
 */
const char *niirf_last_error(void);

/**
 * Loads a checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer to writable storage.
 */
enum NiirfStatus niirf_model_load(const char *path, struct NiirfModel **out);

/**
 * # Safety
 * `model` must come from [`niirf_model_load`] and not be used afterwards. Null is a no-op.
 */
void niirf_model_free(struct NiirfModel *model);

/**
 * Sample rate in Hz, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double niirf_model_sample_rate(const struct NiirfModel *model);

/**
 * One-sided frequency bins per ear (`M/2 + 1`), or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t niirf_model_bins(const struct NiirfModel *model);

/**
 * Filter sections per ear (`K + 2`); 0 when the model has no IIR head.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t niirf_model_sections(const struct NiirfModel *model);

/**
 * Predicted dB magnitudes: `n` rows of `2 * bins` values (left bins then right bins).
 *
 * # Safety
 * `model` must be live; `subject` null (no adapter) or NUL-terminated; `azimuth_deg` and
 * `elevation_deg` must hold `n` values; `out` must hold `capacity` values.
 */
enum NiirfStatus niirf_model_predict_db(const struct NiirfModel *model,
                                        const char *subject,
                                        const double *azimuth_deg,
                                        const double *elevation_deg,
                                        size_t n,
                                        double *out,
                                        size_t capacity);

/**
 * Filter parameters and coefficients of an IIR-head model.
 *
 * Per direction, per ear (left then right), per section (low shelf, peaks, high shelf):
 * `fc, fb, gain_db, b0, b1, b2, a1, a2`, so `n * 2 * sections * 8` values. `fb` is 0 for
 * shelves, and `b2 = a2 = 0`.
 *
 * # Safety
 * Same contract as [`niirf_model_predict_db`].
 */
enum NiirfStatus niirf_model_filters(const struct NiirfModel *model,
                                     const char *subject,
                                     const double *azimuth_deg,
                                     const double *elevation_deg,
                                     size_t n,
                                     double *out,
                                     size_t capacity);

/**
 * Loads an HRTF container.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer to writable storage.
 */
enum NiirfStatus niirf_container_load(const char *path, struct NiirfContainer **out);

/**
 * # Safety
 * `container` must come from [`niirf_container_load`] and not be used afterwards.
 */
void niirf_container_free(struct NiirfContainer *container);

/**
 * Number of subjects, or 0 for a null handle.
 *
 * # Safety
 * `container` must be null or a live handle.
 */
size_t niirf_container_subjects(const struct NiirfContainer *container);

/**
 * Subject id at `index` (ids are sorted); null when out of range. Owned by the container.
 *
 * # Safety
 * `container` must be null or a live handle.
 */
const char *niirf_container_subject_id(const struct NiirfContainer *container, size_t index);

/**
 * Shape of one subject: measurement count, IR length and sample rate.
 *
 * # Safety
 * `container` must be live; the out pointers must be valid or null (skipped).
 */
enum NiirfStatus niirf_container_subject_info(const struct NiirfContainer *container,
                                              size_t index,
                                              size_t *measurements,
                                              size_t *ir_length,
                                              double *sample_rate);

/**
 * Measurement directions in degrees as `azimuth, elevation` pairs (`2 * measurements`).
 *
 * # Safety
 * `container` must be live and `out` must hold `capacity` values.
 */
enum NiirfStatus niirf_container_directions(const struct NiirfContainer *container,
                                            size_t index,
                                            double *out,
                                            size_t capacity);

/**
 * Impulse responses: per measurement the left IR then the right IR
 * (`2 * measurements * ir_length` values).
 *
 * # Safety
 * `container` must be live and `out` must hold `capacity` values.
 */
enum NiirfStatus niirf_container_impulse_responses(const struct NiirfContainer *container,
                                                   size_t index,
                                                   double *out,
                                                   size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NIIRF_H */
