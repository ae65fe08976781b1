/* C interface for the nalm load-monitoring toolkit. */

#ifndef NALM_H
#define NALM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum NalmStatus {
  // The call succeeded.
  NALM_STATUS_OK = 0,
  // A NULL pointer, non-UTF-8 string, or invalid value was passed.
  NALM_STATUS_INVALID_ARGUMENT = 1,
  // Reading or writing a file failed.
  NALM_STATUS_IO = 2,
  // File or configuration contents were malformed.
  NALM_STATUS_PARSE = 3,
  // Training, prediction, or scoring failed.
  NALM_STATUS_COMPUTE = 4,
  // An unexpected internal failure; the library state is still sound.
  NALM_STATUS_INTERNAL = 5,
} NalmStatus;

// A per-appliance, per-second ON/OFF matrix.
typedef struct NalmMask NalmMask;

// A trained disaggregation model.
typedef struct NalmModel NalmModel;

// An aggregate (or single-appliance) power trace.
typedef struct NalmTrace NalmTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *nalm_last_error(void);

// Library version as a static string.
const char *nalm_version(void);

// Read an aggregate trace file into a new handle.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum NalmStatus nalm_trace_read(const char *path, struct NalmTrace **out);

// Number of one-second samples in the trace; 0 for NULL.
//
// # Safety
// `trace` must be NULL or a live handle.
uintptr_t nalm_trace_len(const struct NalmTrace *trace);

// Release a trace handle (NULL is a no-op).
//
// # Safety
// `trace` must be NULL or an owned handle not used afterwards.
void nalm_trace_free(struct NalmTrace *trace);

// Read an ON/OFF mask file into a new handle.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum NalmStatus nalm_mask_read(const char *path, struct NalmMask **out);

// Write a mask to a file in the documented text format.
//
// # Safety
// `mask` must be a live handle; `path` a NUL-terminated string.
enum NalmStatus nalm_mask_write(const struct NalmMask *mask, const char *path);

// Number of appliances in the mask; 0 for NULL.
//
// # Safety
// `mask` must be NULL or a live handle.
uintptr_t nalm_mask_appliance_count(const struct NalmMask *mask);

// Release a mask handle (NULL is a no-op).
//
// # Safety
// `mask` must be NULL or an owned handle not used afterwards.
void nalm_mask_free(struct NalmMask *mask);

// Train a model from an aggregate trace and aligned labels. `config_path`
// may be NULL for defaults, or name a TOML file whose `[train]` section
// holds the hyperparameters.
//
// # Safety
// Handles must be live; strings NUL-terminated; `out` a valid pointer.
enum NalmStatus nalm_model_train(const struct NalmTrace *aggregate,
                                 const struct NalmMask *labels,
                                 const char *config_path,
                                 uint64_t seed,
                                 struct NalmModel **out);

// Load a model file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid pointer.
enum NalmStatus nalm_model_load(const char *path, struct NalmModel **out);

// Save a model to a file; reloading restores it byte-identically.
//
// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum NalmStatus nalm_model_save(const struct NalmModel *model, const char *path);

// Release a model handle (NULL is a no-op).
//
// # Safety
// `model` must be NULL or an owned handle not used afterwards.
void nalm_model_free(struct NalmModel *model);

// Predict per-appliance ON/OFF states for an aggregate trace.
//
// # Safety
// Handles must be live; `out` a valid pointer.
enum NalmStatus nalm_model_predict(const struct NalmModel *model,
                                   const struct NalmTrace *aggregate,
                                   struct NalmMask **out);

// Score predictions against ground truth; `*out_csv` receives the metric
// rows as CSV (per appliance plus an Overall row).
//
// # Safety
// Handles must be live; `out_csv` a valid pointer.
enum NalmStatus nalm_evaluate_csv(const struct NalmMask *predicted,
                                  const struct NalmMask *truth,
                                  char **out_csv);

// Render the usage report for a mask: debounce, extract intervals, and fill
// the sentence template. `config_path` may be NULL for defaults, or name a
// TOML file whose `[debounce]` and `[template]` sections apply.
//
// # Safety
// `mask` must be live; strings NUL-terminated; `out_text` a valid pointer.
enum NalmStatus nalm_report_text(const struct NalmMask *mask,
                                 const char *user,
                                 const char *home,
                                 const char *config_path,
                                 char **out_text);

// Release a string returned through a `char **` out-pointer (NULL is a
// no-op).
//
// # Safety
// `s` must be NULL or a string returned by this library, not used afterwards.
void nalm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NALM_H */
