#ifndef CAREVAL_H
#define CAREVAL_H

/* Generated by cbindgen from careval-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CarevalBiasOrientation {
  /**
   * `100 * |mean_spatial / mean_temporal - 1|`; the default.
   */
  CAREVAL_BIAS_ORIENTATION_TABLE_COMPATIBLE = 0,
  /**
   * `100 * |1 - mean_temporal / mean_spatial|`.
   */
  CAREVAL_BIAS_ORIENTATION_LITERAL = 1,
} CarevalBiasOrientation;

typedef enum CarevalStatus {
  CAREVAL_STATUS_OK = 0,
  CAREVAL_STATUS_NULL_POINTER = 1,
  CAREVAL_STATUS_INVALID_ARGUMENT = 2,
  CAREVAL_STATUS_IO = 3,
  CAREVAL_STATUS_FORMAT = 4,
  CAREVAL_STATUS_METRIC = 5,
  CAREVAL_STATUS_PANIC = 6,
} CarevalStatus;

/**
 * Opaque N×D embedding matrix with row ids.
 */
typedef struct CarevalEmbeddings CarevalEmbeddings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated library version; static storage.
 */
const char *careval_version(void);

/**
 * Message for the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *careval_last_error_message(void);

/**
 * Build a matrix from `rows * dim` row-major floats. `ids` holds `rows`
 * NUL-terminated strings, or is NULL to use the row indices "0", "1", ...
 *
 * # Safety
 * `data` must point to `rows * dim` floats, `ids` (when not NULL) to
 * `rows` valid C strings, and `out` to writable storage for one pointer.
 */
enum CarevalStatus careval_embeddings_from_buffer(const float *data,
                                                  size_t rows,
                                                  size_t dim,
                                                  const char *const *ids,
                                                  struct CarevalEmbeddings **out);

/**
 * Read a CAREEMB1 file. `ids_path` may be NULL for `<data_path>.ids`.
 *
 * # Safety
 * Path arguments must be NULL or valid C strings; `out` must be writable.
 */
enum CarevalStatus careval_embeddings_read(const char *data_path,
                                           const char *ids_path,
                                           struct CarevalEmbeddings **out);

/**
 * Write a CAREEMB1 file. `ids_path` may be NULL for `<data_path>.ids`.
 *
 * # Safety
 * `handle` must come from this library; path arguments must be NULL or
 * valid C strings.
 */
enum CarevalStatus careval_embeddings_write(const struct CarevalEmbeddings *handle,
                                            const char *data_path,
                                            const char *ids_path);

/**
 * Row count, or 0 for a NULL handle.
 *
 * # Safety
 * `handle` must be NULL or come from this library.
 */
size_t careval_embeddings_rows(const struct CarevalEmbeddings *handle);

/**
 * Column count, or 0 for a NULL handle.
 *
 * # Safety
 * `handle` must be NULL or come from this library.
 */
size_t careval_embeddings_dim(const struct CarevalEmbeddings *handle);

/**
 * Release a handle. NULL is ignored.
 *
 * # Safety
 * `handle` must be NULL or come from this library, and must not be used
 * after this call.
 */
void careval_embeddings_free(struct CarevalEmbeddings *handle);

/**
 * Recall@K in percent for both directions. Rows pair by id. `ks` must be
 * positive and strictly ascending; `t2v_out` and `v2t_out` receive `n_ks`
 * values each, in the order of `ks`.
 *
 * # Safety
 * Handles must come from this library; `ks`, `t2v_out` and `v2t_out` must
 * each hold `n_ks` elements.
 */
enum CarevalStatus careval_eval_retrieval(const struct CarevalEmbeddings *text,
                                          const struct CarevalEmbeddings *video,
                                          const size_t *ks,
                                          size_t n_ks,
                                          double *t2v_out,
                                          double *v2t_out);

/**
 * Bias between two recall tables, each laid out as
 * `[t2v R@1, R@5, R@10, v2t R@1, R@5, R@10]` in percent.
 *
 * # Safety
 * `spatial` and `temporal` must each hold 6 doubles; `out` must be writable.
 */
enum CarevalStatus careval_rebias(const double *spatial,
                                  const double *temporal,
                                  enum CarevalBiasOrientation orientation,
                                  double *out);

/**
 * Harmonic mean of precision and recall; 0 when both are 0.
 */
double careval_f1(double precision, double recall);

/**
 * Mean of average R@1 and average F1.
 */
double careval_unified_score(double avg_r1, double avg_f1);

/**
 * In-batch contrastive loss over `n` (anchor, positive, negative) rows of
 * width `dim`, each array row-major `n * dim`.
 *
 * # Safety
 * Each input must hold `n * dim` doubles; `out` must be writable.
 */
enum CarevalStatus careval_info_nce_loss(const double *anchors,
                                         const double *positives,
                                         const double *negatives,
                                         size_t n,
                                         size_t dim,
                                         double tau,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAREVAL_H */
