#ifndef GAPCAST_H
#define GAPCAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  GC_STATUS_INVALID_ARGUMENT = 2,
  GC_STATUS_USAGE_ERROR = 3,
  GC_STATUS_DATA_ERROR = 4,
  GC_STATUS_NUMERIC_ERROR = 5,
  GC_STATUS_BUFFER_TOO_SMALL = 6,
  GC_STATUS_PANIC = 7,
} GcStatus;

typedef enum GcRows {
  GC_ROWS_TRAIN = 0,
  GC_ROWS_TEST = 1,
  GC_ROWS_ALL = 2,
} GcRows;

typedef struct GcForecast GcForecast;

typedef struct GcModel GcModel;

typedef struct GcTable GcTable;

typedef struct GcMetrics {
  double mae;
  double rmse;
  double nrmse_percent;
  double max_error;
  size_t n_samples;
} GcMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *gc_last_error(void);

/**
 * Synthetic market table with `hours` hourly rows.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GcStatus gc_table_synthesize(size_t hours, uint64_t seed, struct GcTable **out);

/**
 * Reads a canonical table written by `gapcast ingest` or `gapcast synth`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GcStatus gc_table_read(const char *path, struct GcTable **out);

/**
 * # Safety
 * `table` must come from this library and `path` be a NUL-terminated string.
 */
enum GcStatus gc_table_write(const struct GcTable *table, const char *path);

/**
 * # Safety
 * `table` must come from this library or be null.
 */
void gc_table_free(struct GcTable *table);

/**
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_table_shape(const struct GcTable *table, size_t *rows, size_t *columns);

/**
 * Copies one column into `buf`. `written` receives the column length even
 * when the buffer is too small.
 *
 * # Safety
 * `buf` must hold `capacity` doubles; other pointers must be valid.
 */
enum GcStatus gc_table_column(const struct GcTable *table,
                              const char *name,
                              double *buf,
                              size_t capacity,
                              size_t *written);

/**
 * Trains on `table` with the default feature menu. `params_json` is a
 * learner parameter object such as `{"learner":"lasso","lambda":0.001}`.
 *
 * # Safety
 * Pointers must be valid and strings NUL-terminated.
 */
enum GcStatus gc_model_train(const struct GcTable *table,
                             const char *params_json,
                             struct GcModel **out);

/**
 * Loads a `model.json` written by `gapcast train`.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` valid.
 */
enum GcStatus gc_model_load(const char *path, struct GcModel **out);

/**
 * # Safety
 * `model` must be valid and `path` NUL-terminated.
 */
enum GcStatus gc_model_save(const struct GcModel *model, const char *path);

/**
 * # Safety
 * `model` must come from this library or be null.
 */
void gc_model_free(struct GcModel *model);

/**
 * Predicts the selected rows of `table` in $/MWh.
 *
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_model_forecast(const struct GcModel *model,
                                const struct GcTable *table,
                                enum GcRows rows,
                                struct GcForecast **out);

/**
 * Per-tree predictions in $/MWh for test row `offset` of `table`, and the
 * share of them within `delta` of `center`. Forest models only.
 *
 * # Safety
 * `buf` must hold `capacity` doubles; other pointers must be valid.
 */
enum GcStatus gc_forest_distribution(const struct GcModel *model,
                                     const struct GcTable *table,
                                     size_t offset,
                                     double center,
                                     double delta,
                                     double *buf,
                                     size_t capacity,
                                     size_t *written,
                                     double *prob_within);

/**
 * # Safety
 * `forecast` must come from this library or be null.
 */
void gc_forecast_free(struct GcForecast *forecast);

/**
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_forecast_len(const struct GcForecast *forecast, size_t *len);

/**
 * Copies actual and predicted values; both buffers hold `capacity` doubles.
 *
 * # Safety
 * Buffers must hold `capacity` doubles.
 */
enum GcStatus gc_forecast_values(const struct GcForecast *forecast,
                                 double *actual,
                                 double *predicted,
                                 size_t capacity);

/**
 * # Safety
 * Pointers must be valid.
 */
enum GcStatus gc_forecast_metrics(const struct GcForecast *forecast, struct GcMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAPCAST_H */
