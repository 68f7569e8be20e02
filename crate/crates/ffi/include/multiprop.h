#ifndef MULTIPROP_H
#define MULTIPROP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum MpStatus {
  MP_STATUS_OK = 0,
  MP_STATUS_NULL_POINTER = 1,
  MP_STATUS_INVALID_UTF8 = 2,
  /**
   * The configuration or arguments were rejected.
   */
  MP_STATUS_CONFIG = 3,
  /**
   * Sampling or a diagnostic failed at run time.
   */
  MP_STATUS_RUNTIME = 4,
  /**
   * An output buffer is shorter than required.
   */
  MP_STATUS_BUFFER_TOO_SMALL = 5,
  MP_STATUS_PANIC = 6,
} MpStatus;

/**
 * The recorded states of one chain.
 */
typedef struct MpChain MpChain;

/**
 * A parsed and validated experiment configuration.
 */
typedef struct MpExperiment MpExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *mp_last_error(void);

/**
 * Parses a TOML experiment description.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MpStatus mp_experiment_from_toml(const char *toml, struct MpExperiment **out);

/**
 * Releases an experiment. NULL is ignored.
 *
 * # Safety
 * `exp` must come from [`mp_experiment_from_toml`] and not be freed twice.
 */
void mp_experiment_free(struct MpExperiment *exp);

/**
 * Runs chain number `chain` of the experiment with `workers` threads
 * (0 = all cores). The experiment's `n_chains` is not consulted.
 *
 * # Safety
 * `exp` must be a live experiment and `out` a writable pointer.
 */
enum MpStatus mp_experiment_run_chain(const struct MpExperiment *exp,
                                      uint64_t chain,
                                      size_t workers,
                                      struct MpChain **out);

/**
 * Number of stored states, including the initial one. 0 for NULL.
 *
 * # Safety
 * `chain` must be NULL or a live chain.
 */
size_t mp_chain_len(const struct MpChain *chain);

/**
 * State dimension. 0 for NULL.
 *
 * # Safety
 * `chain` must be NULL or a live chain.
 */
size_t mp_chain_dim(const struct MpChain *chain);

/**
 * Copies all states row by row into `out`, which must hold at least
 * `len * dim` doubles.
 *
 * # Safety
 * `chain` must be a live chain and `out` must point to `capacity` doubles.
 */
enum MpStatus mp_chain_copy_samples(const struct MpChain *chain, double *out, size_t capacity);

/**
 * Fraction of iterations that moved.
 *
 * # Safety
 * `chain` must be a live chain and `out` a writable pointer.
 */
enum MpStatus mp_chain_move_rate(const struct MpChain *chain, double *out);

/**
 * Releases a chain. NULL is ignored.
 *
 * # Safety
 * `chain` must come from [`mp_experiment_run_chain`] and not be freed twice.
 */
void mp_chain_free(struct MpChain *chain);

/**
 * Normalized Barker selection probabilities from `n` log-masses.
 *
 * # Safety
 * `log_masses` and `out` must each point to `n` doubles.
 */
enum MpStatus mp_barker_weights(const double *log_masses, size_t n, double *out);

/**
 * Effective sample size of a scalar series of length `n`.
 *
 * # Safety
 * `series` must point to `n` doubles and `out` be writable.
 */
enum MpStatus mp_ess(const double *series, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTIPROP_H */
