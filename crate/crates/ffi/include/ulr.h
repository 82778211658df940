#ifndef ULR_H
#define ULR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ULR_POOLING_CLS 0

#define ULR_POOLING_MEAN 1

#define ULR_POOLING_MAX 2

typedef enum UlrStatus {
  ULR_STATUS_OK = 0,
  ULR_STATUS_NULL_POINTER = 1,
  ULR_STATUS_INVALID_UTF8 = 2,
  ULR_STATUS_INVALID_ARGUMENT = 3,
  ULR_STATUS_IO = 4,
  ULR_STATUS_PARSE = 5,
  ULR_STATUS_CHECKPOINT = 6,
  ULR_STATUS_DEGENERATE = 7,
  ULR_STATUS_BUFFER_TOO_SMALL = 8,
  ULR_STATUS_NOT_FOUND = 9,
  ULR_STATUS_PANIC = 10,
} UlrStatus;

/**
 * A text embedder: a trained checkpoint or averaged word vectors.
 */
typedef struct UlrEmbedder UlrEmbedder;

/**
 * An n-gram table together with the vocabulary its ids refer to.
 */
typedef struct UlrNgramTable UlrNgramTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *ulr_last_error_message(void);

/**
 * Length-normalized PMI of an n-gram from its joint count, the counts of
 * its `n` tokens, and the corpus size.
 *
 * # Safety
 * `unigram_counts` must point to `n` readable values; `out` must be writable.
 */
enum UlrStatus ulr_pmi(uint64_t joint,
                       const uint64_t *unigram_counts,
                       size_t n,
                       uint64_t total,
                       double *out);

/**
 * Index of the candidate maximizing cosine(c + b - a, candidate); the
 * lowest index wins ties. All vectors have `dim` entries; `candidates` is
 * row-major `n_candidates x dim`.
 *
 * # Safety
 * Each pointer must reference the stated number of readable values, and
 * `out_index` must be writable.
 */
enum UlrStatus ulr_analogy_answer(const double *a,
                                  const double *b,
                                  const double *c,
                                  const double *candidates,
                                  size_t n_candidates,
                                  size_t dim,
                                  size_t *out_index);

/**
 * Opens a checkpoint with its vocabulary file. `pooling_code` is one of the
 * `ULR_POOLING_*` constants.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
enum UlrStatus ulr_embedder_open_checkpoint(const char *checkpoint_path,
                                            const char *vocab_path,
                                            int pooling_code,
                                            struct UlrEmbedder **out);

/**
 * Opens a word-vector file; texts are embedded as the mean of their known
 * words' vectors.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum UlrStatus ulr_embedder_open_vectors(const char *path, struct UlrEmbedder **out);

/**
 * Embedding dimension, or 0 for a null handle.
 *
 * # Safety
 * `embedder` must be null or a live handle.
 */
size_t ulr_embedder_dim(const struct UlrEmbedder *embedder);

/**
 * Writes the unit-norm embedding of `text` into `out`, which holds `len`
 * values. `len` must be at least the embedder's dimension.
 *
 * # Safety
 * `embedder` must be a live handle, `text` a NUL-terminated string and
 * `out` writable for `len` values.
 */
enum UlrStatus ulr_embedder_embed(const struct UlrEmbedder *embedder,
                                  const char *text,
                                  double *out,
                                  size_t len);

/**
 * # Safety
 * `embedder` must be null or a handle not yet freed.
 */
void ulr_embedder_free(struct UlrEmbedder *embedder);

/**
 * Reads an n-gram table file and the vocabulary it was written with.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
enum UlrStatus ulr_ngram_table_open(const char *table_path,
                                    const char *vocab_path,
                                    struct UlrNgramTable **out);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t ulr_ngram_table_len(const struct UlrNgramTable *table);

/**
 * Looks up the n-gram spelled by `text` (tokenized like the corpus) and
 * writes its PMI and count. Returns `ULR_STATUS_NOT_FOUND` when absent.
 *
 * # Safety
 * `table` must be a live handle, `text` a NUL-terminated string, and both
 * outputs writable.
 */
enum UlrStatus ulr_ngram_table_lookup(const struct UlrNgramTable *table,
                                      const char *text,
                                      double *out_pmi,
                                      uint64_t *out_count);

/**
 * # Safety
 * `table` must be null or a handle not yet freed.
 */
void ulr_ngram_table_free(struct UlrNgramTable *table);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ULR_H */
