#ifndef TLNAS_H
#define TLNAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Split selector for dataset queries and batch sampling.
 */
typedef enum TlnasSplit {
  TLNAS_SPLIT_TRAIN = 0,
  TLNAS_SPLIT_VAL = 1,
  TLNAS_SPLIT_TEST = 2,
} TlnasSplit;

/**
 * Result of every call; the numeric values match the command-line exit codes
 * for argument, data and numeric failures.
 */
typedef enum TlnasStatus {
  TLNAS_STATUS_OK = 0,
  TLNAS_STATUS_NULL_ARGUMENT = 1,
  TLNAS_STATUS_INVALID_ARGUMENT = 2,
  TLNAS_STATUS_DATA = 3,
  TLNAS_STATUS_NUMERIC = 4,
  TLNAS_STATUS_PANIC = 5,
} TlnasStatus;

/**
 * Loaded dataset splits.
 */
typedef struct TlnasDataset TlnasDataset;

/**
 * Trained-accuracy lookup table.
 */
typedef struct TlnasFixture TlnasFixture;

typedef struct TlnasWelch {
  double t_statistic;
  double degrees_of_freedom;
  double p_two_sided;
  /**
   * One-sided p-value for `mean(a) > mean(b)`.
   */
  double p_greater;
} TlnasWelch;

/**
 * Untrained-accuracy moments of one architecture.
 */
typedef struct TlnasScore {
  double mu_u;
  double sigma_u;
  double cv_u;
  /**
   * Non-zero when every initialisation gave the same accuracy.
   */
  uint8_t degenerate;
  uint64_t batch_seed;
  uint64_t init_base_seed;
} TlnasScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *tlnas_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tlnas_version(void);

/**
 * Population coefficient of variation of `n` accuracies; `0` when the mean
 * is zero.
 *
 * # Safety
 * `values` must point to `n` readable doubles (may be null when `n == 0`).
 */
enum TlnasStatus tlnas_cv_u(const double *values, size_t n, double *out);

/**
 * Population mean and standard deviation.
 *
 * # Safety
 * `values` must point to `n` readable doubles; `mean` and `std` must be
 * writable.
 */
enum TlnasStatus tlnas_mean_std(const double *values, size_t n, double *mean, double *std);

/**
 * Welch's unequal-variance t-test of `a` against `b`.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` readable doubles.
 */
enum TlnasStatus tlnas_welch_t_test(const double *a,
                                    size_t na,
                                    const double *b,
                                    size_t nb,
                                    struct TlnasWelch *out);

/**
 * Canonical index of a cell string, in `[0, 15625)`.
 *
 * # Safety
 * `arch` must be a NUL-terminated string.
 */
enum TlnasStatus tlnas_cell_index(const char *arch, size_t *out);

/**
 * Loads a dataset directory or `TLNAS1` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TlnasStatus tlnas_dataset_open(const char *path, struct TlnasDataset **out);

/**
 * Releases a dataset. Null is ignored.
 *
 * # Safety
 * `ds` must come from [`tlnas_dataset_open`] and not be used afterwards.
 */
void tlnas_dataset_free(struct TlnasDataset *ds);

/**
 * Number of images in one split.
 *
 * # Safety
 * `ds` must be a live dataset handle.
 */
enum TlnasStatus tlnas_dataset_len(const struct TlnasDataset *ds,
                                   enum TlnasSplit split,
                                   size_t *out);

/**
 * Untrained-accuracy statistics of an architecture on one batch.
 *
 * `arch` is a cell string (scored in the canonical skeleton) or an MLP
 * string `W1,W2`. The batch is drawn from `split` with
 * `seed_hash([seed, 0])` and initialisations use `seed_hash([seed, 1])` as
 * base, matching the `score` command. Pixels are standardised per channel.
 *
 * # Safety
 * `ds` must be a live dataset handle and `arch` a NUL-terminated string.
 */
enum TlnasStatus tlnas_score(const struct TlnasDataset *ds,
                             const char *arch,
                             enum TlnasSplit split,
                             size_t n_init,
                             size_t batch_size,
                             uint64_t seed,
                             struct TlnasScore *out);

/**
 * Loads a benchmark fixture (JSON lines).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TlnasStatus tlnas_fixture_open(const char *path, struct TlnasFixture **out);

/**
 * Releases a fixture. Null is ignored.
 *
 * # Safety
 * `fx` must come from [`tlnas_fixture_open`] and not be used afterwards.
 */
void tlnas_fixture_free(struct TlnasFixture *fx);

/**
 * Trained validation and test accuracy (percent) of a cell on a dataset.
 *
 * # Safety
 * `fx` must be a live fixture handle; strings NUL-terminated.
 */
enum TlnasStatus tlnas_fixture_lookup(const struct TlnasFixture *fx,
                                      const char *arch,
                                      const char *dataset,
                                      double *val_acc,
                                      double *test_acc);

/**
 * Number of architectures the fixture holds for `dataset`.
 *
 * # Safety
 * `fx` must be a live fixture handle; `dataset` NUL-terminated.
 */
enum TlnasStatus tlnas_fixture_count(const struct TlnasFixture *fx,
                                     const char *dataset,
                                     size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TLNAS_H */
