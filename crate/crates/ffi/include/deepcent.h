#ifndef DEEPCENT_H
#define DEEPCENT_H

#pragma once

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_ARGUMENT = 2,
  DC_STATUS_DATA_ERROR = 3,
  DC_STATUS_NUMERICAL_ERROR = 4,
  DC_STATUS_IO_ERROR = 5,
  DC_STATUS_PANIC = 6,
} DcStatus;

// Opaque dataset handle.
typedef struct DcDataset DcDataset;

// Opaque fitted-model handle.
typedef struct DcModel DcModel;

// Training options; obtain defaults from [`dc_train_options_default`].
typedef struct DcTrainOptions {
  size_t epochs;
  double learning_rate;
  double dropout;
  uint64_t seed;
} DcTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *dc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dc_version(void);

// Read a dataset CSV (`time`, `event`, covariate columns).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DcStatus dc_dataset_load_csv(const char *path, struct DcDataset **out);

// Simulate from the built-in design. `competing` selects the two-cause
// generator; `censoring` is the target censoring proportion in `[0, 1)`.
//
// # Safety
// `out` must be writable.
enum DcStatus dc_dataset_simulate(bool competing,
                                  size_t n,
                                  double censoring,
                                  uint64_t seed,
                                  struct DcDataset **out);

// Number of records, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t dc_dataset_len(const struct DcDataset *ds);

// # Safety
// `ds` must be null or a live handle.
size_t dc_dataset_n_covariates(const struct DcDataset *ds);

// Copy the covariate matrix (row-major, `len × n_covariates`) into `out`.
//
// # Safety
// `out` must hold `len * n_covariates` doubles.
enum DcStatus dc_dataset_covariates(const struct DcDataset *ds, double *out);

// # Safety
// `ds` must be null or a handle not yet freed.
void dc_dataset_free(struct DcDataset *ds);

struct DcTrainOptions dc_train_options_default(void);

// Fit `method` (`deepcent`, `rankdeepsurv-loss`, `weibull`, `cr-deepcent`,
// `cr-weibull`) on `ds`. `options` may be null for defaults; Weibull methods
// ignore it.
//
// # Safety
// Pointers must be valid; `method` NUL-terminated; `out` writable.
enum DcStatus dc_model_train(const struct DcDataset *ds,
                             const char *method,
                             const struct DcTrainOptions *options,
                             struct DcModel **out);

// Number of prediction columns: 1 (single risk) or 2 (competing).
//
// # Safety
// `model` must be null or a live handle.
size_t dc_model_n_causes(const struct DcModel *model);

// # Safety
// `model` must be null or a live handle.
size_t dc_model_n_covariates(const struct DcModel *model);

// Predict for `n_rows` covariate rows (row-major `x`). Writes
// `n_rows * n_causes` values to `out`, cause-major: all cause-1 predictions
// followed by all cause-2 predictions.
//
// # Safety
// `x` must hold `n_rows * n_cols` doubles and `out` `n_rows * n_causes`.
enum DcStatus dc_model_predict(const struct DcModel *model,
                               const double *x,
                               size_t n_rows,
                               size_t n_cols,
                               double *out);

// # Safety
// `path` must be NUL-terminated.
enum DcStatus dc_model_save(const struct DcModel *model, const char *path);

// # Safety
// `path` must be NUL-terminated; `out` writable.
enum DcStatus dc_model_load(const char *path, struct DcModel **out);

// # Safety
// `model` must be null or a handle not yet freed.
void dc_model_free(struct DcModel *model);

// Harrell's C-index for `cause` over `n` records.
//
// # Safety
// `y`, `delta` and `yhat` must each hold `n` elements; `out` writable.
enum DcStatus dc_harrell_c(const double *y,
                           const uint8_t *delta,
                           const double *yhat,
                           size_t n,
                           uint8_t cause,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEPCENT_H */
