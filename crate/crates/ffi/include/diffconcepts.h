/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef DIFFCONCEPTS_H
#define DIFFCONCEPTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  /**
   * Null pointer, non-UTF-8 string or zero-sized buffer.
   */
  DC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Missing path, bad configuration or index out of range.
   */
  DC_STATUS_INVALID_INPUT = 2,
  /**
   * Malformed file, shape mismatch or unusable data.
   */
  DC_STATUS_DATA_ERROR = 3,
  /**
   * Degenerate or non-convergent numerics.
   */
  DC_STATUS_NUMERICAL_ERROR = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  DC_STATUS_PANIC = 5,
} DcStatus;

/**
 * Unit concept directions with provenance.
 */
typedef struct DcDictionary DcDictionary;

/**
 * Row-major `n × d` float32 matrix.
 */
typedef struct DcMatrix DcMatrix;

/**
 * Extraction parameters; start from [`dc_extract_options_default`].
 */
typedef struct DcExtractOptions {
  size_t k;
  uint64_t seed;
  double skew_epsilon;
  /**
   * Enables skewness orientation and weighting.
   */
  bool weighting;
} DcExtractOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dc_version(void);

/**
 * Copy `n × d` floats from `data` into a new matrix.
 *
 * # Safety
 * `data` must point to `n * d` readable floats and `out` to a writable
 * handle slot.
 */
enum DcStatus dc_matrix_new(const float *data, size_t n, size_t d, struct DcMatrix **out);

/**
 * Load a 2-D float32 `.npy` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum DcStatus dc_matrix_read_npy(const char *path, struct DcMatrix **out);

/**
 * # Safety
 * `m` must be a live matrix handle and `path` a NUL-terminated string.
 */
enum DcStatus dc_matrix_write_npy(const struct DcMatrix *m, const char *path);

/**
 * # Safety
 * `m` must be a live matrix handle; `n` and `d` may be null.
 */
enum DcStatus dc_matrix_shape(const struct DcMatrix *m, size_t *n, size_t *d);

/**
 * Borrowed pointer to the row-major values, valid while `m` lives.
 * Null when `m` is null.
 *
 * # Safety
 * `m` must be null or a live matrix handle.
 */
const float *dc_matrix_data(const struct DcMatrix *m);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void dc_matrix_free(struct DcMatrix *m);

struct DcExtractOptions dc_extract_options_default(void);

/**
 * Cluster skewness-weighted pairwise differences of `acts` into a
 * dictionary.
 *
 * # Safety
 * `acts` must be a live matrix handle, `opts` null (defaults) or valid, and
 * `out` a writable handle slot.
 */
enum DcStatus dc_extract(const struct DcMatrix *acts,
                         const struct DcExtractOptions *opts,
                         struct DcDictionary **out);

/**
 * Load a dictionary directory (`concepts.npy` plus metadata).
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum DcStatus dc_dictionary_read(const char *dir, struct DcDictionary **out);

/**
 * # Safety
 * `dict` must be a live dictionary handle and `dir` a NUL-terminated string.
 */
enum DcStatus dc_dictionary_write(const struct DcDictionary *dict, const char *dir);

/**
 * # Safety
 * `dict` must be a live dictionary handle; `k` and `d` may be null.
 */
enum DcStatus dc_dictionary_shape(const struct DcDictionary *dict, size_t *k, size_t *d);

/**
 * Borrowed pointer to the `k × d` row-major directions, valid while `dict`
 * lives. Null when `dict` is null.
 *
 * # Safety
 * `dict` must be null or a live dictionary handle.
 */
const float *dc_dictionary_directions(const struct DcDictionary *dict);

/**
 * # Safety
 * `dict` must be null or a handle not yet freed.
 */
void dc_dictionary_free(struct DcDictionary *dict);

/**
 * Concept scores `acts · dictᵀ` as a new `n × k` matrix.
 *
 * # Safety
 * `acts` and `dict` must be live handles and `out` a writable handle slot.
 */
enum DcStatus dc_score(const struct DcMatrix *acts,
                       const struct DcDictionary *dict,
                       struct DcMatrix **out);

/**
 * `out = x + alpha · c` for concept `concept`. `out` may alias `x`.
 *
 * # Safety
 * `x` must hold `dim` readable floats, `out` `dim` writable floats, and
 * `dict` must be a live dictionary handle.
 */
enum DcStatus dc_steer(const float *x,
                       size_t dim,
                       const struct DcDictionary *dict,
                       size_t concept,
                       double alpha,
                       float *out);

/**
 * Remove the component of `x` along concept `concept`. `out` may alias `x`.
 *
 * # Safety
 * Same contract as [`dc_steer`].
 */
enum DcStatus dc_zero_out(const float *x,
                          size_t dim,
                          const struct DcDictionary *dict,
                          size_t concept,
                          float *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFCONCEPTS_H */
