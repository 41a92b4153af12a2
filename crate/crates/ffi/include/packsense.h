#ifndef PACKSENSE_H
#define PACKSENSE_H

/* Generated by cbindgen from the packsense-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible FFI call.
 */
typedef enum PsStatus {
  /**
   * The call succeeded.
   */
  PS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  PS_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument had an invalid value (wrong length, out-of-range).
   */
  PS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The model bytes could not be decoded or deserialized.
   */
  PS_STATUS_BAD_MODEL = 3,
  /**
   * Inference failed (input shape mismatch or internal error).
   */
  PS_STATUS_INFERENCE_ERROR = 4,
} PsStatus;

/**
 * Opaque handle to a loaded model (float or quantized).
 */
typedef struct PsModel PsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread; never free it.
 */
const char *ps_last_error_message(void);

/**
 * Static name of a status code (e.g. `"ok"`, `"bad_model"`).
 */
const char *ps_status_name(enum PsStatus status);

/**
 * Loads a model from its serialized container bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be a valid pointer.
 */
enum PsStatus ps_model_from_bytes(const uint8_t *data, uintptr_t len, struct PsModel **out);

/**
 * Loads a model from entropy-encoded bytes (the `encode` artifact):
 * decodes the canonical Huffman container, then deserializes.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be a valid pointer.
 */
enum PsStatus ps_model_from_encoded_bytes(const uint8_t *data, uintptr_t len, struct PsModel **out);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a pointer previously returned by a `ps_model_from_*`
 * constructor, and must not be used afterwards.
 */
void ps_model_free(struct PsModel *model);

/**
 * Model kind: 0 float, 1 quantized, -1 if `model` is null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
int32_t ps_model_kind(const struct PsModel *model);

/**
 * Expected window length in time steps (each step carries 3 axis values);
 * 0 if `model` is null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t ps_model_input_len(const struct PsModel *model);

/**
 * Number of output classes; 0 if `model` is null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t ps_model_num_classes(const struct PsModel *model);

/**
 * Runs one window through the model and writes the class probabilities.
 * `probs_out` must hold at least `ps_model_num_classes` floats; the number
 * written is stored in `written` when it is non-null.
 *
 * # Safety
 * `model` must be a live handle; `values` must point to `values_len`
 * floats; `probs_out` must point to `probs_cap` writable floats.
 */
enum PsStatus ps_model_infer(const struct PsModel *model,
                             const float *values,
                             uintptr_t values_len,
                             float *probs_out,
                             uintptr_t probs_cap,
                             uintptr_t *written);

/**
 * Classifies one window with threshold gating: the winning target class
 * must exceed its threshold or the window is rejected into Dummy (class 2).
 * Thresholds are probabilities in [0, 1].
 *
 * # Safety
 * `model` must be a live handle; `values` must point to `values_len`
 * floats; `label_out` must be a valid pointer.
 */
enum PsStatus ps_model_classify(const struct PsModel *model,
                                const float *values,
                                uintptr_t values_len,
                                double threshold_forklift,
                                double threshold_truck,
                                int32_t *label_out);

/**
 * Analytic per-inference energy: total = active power × duration, marginal
 * = (active − baseline) × duration, both in millijoules.
 *
 * # Safety
 * `total_mj` and `marginal_mj` must be valid pointers.
 */
enum PsStatus ps_energy_estimate(double active_power_mw,
                                 double baseline_power_mw,
                                 double inference_duration_ms,
                                 double *total_mj,
                                 double *marginal_mj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACKSENSE_H */
