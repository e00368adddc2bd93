/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DIRACCBD_H
#define DIRACCBD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  CBD_MODE_SYMBOLIC = 0,
  CBD_MODE_NUMERICAL = 1,
} cbd_mode;

typedef enum {
  CBD_STATUS_OK = 0,
  CBD_STATUS_NULL_POINTER = 1,
  CBD_STATUS_INVALID_UTF8 = 2,
  CBD_STATUS_MODEL_ERROR = 3,
  CBD_STATUS_SIMULATION_ERROR = 4,
  CBD_STATUS_OUT_OF_RANGE = 5,
  CBD_STATUS_BUFFER_TOO_SMALL = 6,
  CBD_STATUS_PANIC = 7,
} cbd_status;

typedef struct cbd_model cbd_model;

typedef struct cbd_trace cbd_trace;

/**
 * Simulation settings; fill with [`cbd_config_default`].
 */
typedef struct {
  cbd_mode mode;
  double step;
  double end_time;
  double zc_tol;
  double min_step;
} cbd_config;

typedef struct {
  double time;
  /**
   * Index into the trace's signals.
   */
  size_t signal;
  uint32_t order;
  double coefficient;
} cbd_impulse;

typedef struct {
  double value;
  double printed_formula;
  bool overflow_risk;
} cbd_magnitude;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *cbd_last_error(void);

cbd_config cbd_config_default(cbd_mode mode, double step, double end_time);

/**
 * Parses and validates model source text.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `model` must be writable.
 */
cbd_status cbd_model_load(const char *source, cbd_model **model);

/**
 * # Safety
 * `model` must come from [`cbd_model_load`] and not be used afterwards.
 */
void cbd_model_free(cbd_model *model);

/**
 * Runs definition `top` of `model`, watching its declared outputs.
 *
 * # Safety
 * `model` must be a live handle, `top` a NUL-terminated string, `config`
 * and `trace` valid pointers.
 */
cbd_status cbd_simulate(const cbd_model *model,
                        const char *top,
                        const cbd_config *config,
                        cbd_trace **trace);

/**
 * # Safety
 * `trace` must come from [`cbd_simulate`] and not be used afterwards.
 */
void cbd_trace_free(cbd_trace *trace);

/**
 * Number of committed steps, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t cbd_trace_steps(const cbd_trace *trace);

/**
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t cbd_trace_signal_count(const cbd_trace *trace);

/**
 * Name of signal `index`, owned by the trace; null when out of range.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
const char *cbd_trace_signal_name(const cbd_trace *trace, size_t index);

/**
 * Time and left/right limits of signal `signal` at step `step`.
 *
 * # Safety
 * `trace` must be a live handle; the output pointers must be writable.
 */
cbd_status cbd_trace_sample(const cbd_trace *trace,
                            size_t signal,
                            size_t step,
                            double *time,
                            double *left,
                            double *right);

/**
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t cbd_trace_impulse_count(const cbd_trace *trace);

/**
 * # Safety
 * `trace` must be a live handle and `impulse` writable.
 */
cbd_status cbd_trace_impulse(const cbd_trace *trace, size_t index, cbd_impulse *impulse);

/**
 * Finite-difference table of a unit step, row-major with `order + 1`
 * columns and `order + 2` rows starting one step before the jump.
 * `written` receives the number of values needed; when `capacity` is too
 * small nothing is copied and `CBD_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `values` must hold `capacity` doubles (it may be null when `capacity`
 * is 0); `written` must be writable.
 */
cbd_status cbd_difference_table(uint32_t order,
                                double step,
                                double *values,
                                size_t capacity,
                                size_t *written);

/**
 * Largest value an order-`order` numerical derivative reaches for a jump
 * of size `jump`. On an internal failure both values are NaN and `overflow_risk` is set.
 */
cbd_magnitude cbd_max_magnitude(uint32_t order, double step, double jump);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRACCBD_H */
