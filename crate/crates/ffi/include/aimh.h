#ifndef AIMH_H
#define AIMH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AimhStatus {
  AIMH_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  AIMH_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  AIMH_STATUS_INVALID_UTF8 = 2,
  /**
   * The configuration was rejected.
   */
  AIMH_STATUS_CONFIG = 3,
  /**
   * Sampling or I/O failed.
   */
  AIMH_STATUS_RUNTIME = 4,
  /**
   * A caller buffer was too small or an index out of range.
   */
  AIMH_STATUS_OUT_OF_RANGE = 5,
  /**
   * An internal panic was caught.
   */
  AIMH_STATUS_PANIC = 6,
} AimhStatus;

/**
 * One chain of an experiment, stepped by the caller.
 */
typedef struct AimhChain AimhChain;

/**
 * Parsed experiment configuration.
 */
typedef struct AimhConfig AimhConfig;

/**
 * Results of a finished ensemble run.
 */
typedef struct AimhEnsemble AimhEnsemble;

/**
 * Outcome of one chain iteration.
 */
typedef struct AimhStep {
  uint64_t iteration;
  double alpha;
  bool accepted;
  bool independent;
  bool regenerated;
} AimhStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *aimh_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aimh_version(void);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` is writable.
 */
enum AimhStatus aimh_config_parse(const char *text, struct AimhConfig **out);

/**
 * Loads a named preset.
 *
 * # Safety
 * `name` is a NUL-terminated string; `out` is writable.
 */
enum AimhStatus aimh_config_preset(const char *name, struct AimhConfig **out);

/**
 * Overrides the master seed and ensemble size.
 *
 * # Safety
 * `config` is a live handle.
 */
enum AimhStatus aimh_config_set_size(struct AimhConfig *config,
                                     uint64_t seed,
                                     size_t n_chains,
                                     uint64_t n_iterations);

/**
 * Dimension of the configured target.
 *
 * # Safety
 * `config` is a live handle and `out` is writable.
 */
enum AimhStatus aimh_config_dim(const struct AimhConfig *config, size_t *out);

/**
 * # Safety
 * `config` is null or a handle not yet freed.
 */
void aimh_config_free(struct AimhConfig *config);

/**
 * Builds chain `index` of the experiment, seeded exactly as in an
 * ensemble run, and draws its initial state.
 *
 * # Safety
 * `config` is a live handle; `out` is writable.
 */
enum AimhStatus aimh_chain_new(const struct AimhConfig *config,
                               size_t index,
                               struct AimhChain **out);

/**
 * Runs one iteration; `info` may be null.
 *
 * # Safety
 * `chain` is a live handle; `info` is null or writable.
 */
enum AimhStatus aimh_chain_step(struct AimhChain *chain, struct AimhStep *info);

/**
 * Copies the current state into `buf`, which holds `len` values.
 *
 * # Safety
 * `chain` is a live handle; `buf` points to `len` writable doubles.
 */
enum AimhStatus aimh_chain_state(const struct AimhChain *chain, double *buf, size_t len);

/**
 * Number of states in the chain's history.
 *
 * # Safety
 * `chain` is null or a live handle.
 */
size_t aimh_chain_history_len(const struct AimhChain *chain);

/**
 * # Safety
 * `chain` is null or a handle not yet freed.
 */
void aimh_chain_free(struct AimhChain *chain);

/**
 * Runs the whole ensemble on `threads` workers (0 = one per core).
 * Failed chains are recorded in the result, not reported here.
 *
 * # Safety
 * `config` is a live handle; `out` is writable.
 */
enum AimhStatus aimh_ensemble_run(const struct AimhConfig *config,
                                  size_t threads,
                                  struct AimhEnsemble **out);

/**
 * Number of chains that stopped with an error.
 *
 * # Safety
 * `ensemble` is null or a live handle.
 */
size_t aimh_ensemble_failed(const struct AimhEnsemble *ensemble);

/**
 * Acceptance rate of chain `index`.
 *
 * # Safety
 * `ensemble` is a live handle; `out` is writable.
 */
enum AimhStatus aimh_ensemble_acceptance(const struct AimhEnsemble *ensemble,
                                         size_t index,
                                         double *out);

/**
 * Copies the convergence series. With null buffers only `*len_out` is
 * set to the number of snapshots; otherwise `iterations` and `tv` must
 * hold `len` values each.
 *
 * # Safety
 * `ensemble` is a live handle; buffers are null or hold `len` values.
 */
enum AimhStatus aimh_ensemble_convergence(const struct AimhEnsemble *ensemble,
                                          uint64_t *iterations,
                                          double *tv,
                                          size_t len,
                                          size_t *len_out);

/**
 * Noise floor of the convergence measure.
 *
 * # Safety
 * `ensemble` is a live handle; `out` is writable.
 */
enum AimhStatus aimh_ensemble_noise_floor(const struct AimhEnsemble *ensemble, double *out);

/**
 * Writes the CSV files and manifest into `dir`.
 *
 * # Safety
 * `ensemble` is a live handle; `dir` is a NUL-terminated path.
 */
enum AimhStatus aimh_ensemble_write(const struct AimhEnsemble *ensemble, const char *dir);

/**
 * # Safety
 * `ensemble` is null or a handle not yet freed.
 */
void aimh_ensemble_free(struct AimhEnsemble *ensemble);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIMH_H */
