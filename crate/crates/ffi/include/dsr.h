#ifndef DSR_H
#define DSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsrStatus {
  DSR_STATUS_OK = 0,
  DSR_STATUS_NULL_POINTER = 1,
  DSR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A caller buffer has the wrong length.
   */
  DSR_STATUS_BAD_LENGTH = 3,
  DSR_STATUS_CONFIG = 4,
  DSR_STATUS_ENV = 5,
  DSR_STATUS_IO = 6,
  DSR_STATUS_CHECKPOINT = 7,
  DSR_STATUS_NUMERIC = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  DSR_STATUS_INTERNAL = 9,
} DsrStatus;

/**
 * Point-mass environment with its frame stack.
 */
typedef struct DsrEnv DsrEnv;

/**
 * Deterministic policy restored from a checkpoint.
 */
typedef struct DsrPolicy DsrPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes, into `buf`. Returns the full message length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dsr_last_error(char *buf, size_t len);

/**
 * Creates an environment from the `[env]` section of a TOML run
 * configuration, or from the defaults when `config_toml` is null.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be
 * writable.
 */
enum DsrStatus dsr_env_new(const char *config_toml, struct DsrEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from [`dsr_env_new`] not yet freed.
 */
void dsr_env_free(struct DsrEnv *env);

/**
 * Single-frame observation and action sizes.
 *
 * # Safety
 * `env` must be a live handle; `obs_dim` and `act_dim` must be writable.
 */
enum DsrStatus dsr_env_dims(const struct DsrEnv *env, size_t *obs_dim, size_t *act_dim);

/**
 * Starts an episode and writes the first observation (`obs_dim` values).
 *
 * # Safety
 * `env` must be a live handle and `obs` must hold `obs_len` doubles.
 */
enum DsrStatus dsr_env_reset(struct DsrEnv *env,
                             uint64_t scene_seed,
                             uint64_t episode_seed,
                             double *obs,
                             size_t obs_len);

/**
 * Advances one step. Out-of-range actions are clamped.
 *
 * # Safety
 * `env` must be a live handle, `action` must hold `action_len` doubles,
 * `obs` must hold `obs_len` doubles and `reward`, `done` must be writable.
 */
enum DsrStatus dsr_env_step(struct DsrEnv *env,
                            const double *action,
                            size_t action_len,
                            double *obs,
                            size_t obs_len,
                            double *reward,
                            bool *done);

/**
 * The last three observations concatenated, oldest first: the input a
 * policy expects.
 *
 * # Safety
 * `env` must be a live handle and `out` must hold `len` doubles.
 */
enum DsrStatus dsr_env_stacked_obs(const struct DsrEnv *env, double *out, size_t len);

/**
 * Task position and velocity, `2 · pos_dim` values.
 *
 * # Safety
 * `env` must be a live handle and `out` must hold `len` doubles.
 */
enum DsrStatus dsr_env_true_state(const struct DsrEnv *env, double *out, size_t len);

/**
 * Loads a checkpoint directory (or a run directory containing one).
 *
 * # Safety
 * `checkpoint_dir` must be a NUL-terminated string; `out` must be writable.
 */
enum DsrStatus dsr_policy_load(const char *checkpoint_dir, struct DsrPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle from [`dsr_policy_load`] not yet freed.
 */
void dsr_policy_free(struct DsrPolicy *policy);

/**
 * Stacked-observation, action and latent sizes.
 *
 * # Safety
 * `policy` must be a live handle; the outputs must be writable.
 */
enum DsrStatus dsr_policy_dims(const struct DsrPolicy *policy,
                               size_t *stacked_obs_dim,
                               size_t *act_dim,
                               size_t *latent_dim);

/**
 * Mean action for one stacked observation.
 *
 * # Safety
 * `policy` must be a live handle, `obs` must hold `obs_len` doubles and
 * `action` must hold `action_len` doubles.
 */
enum DsrStatus dsr_policy_act(const struct DsrPolicy *policy,
                              const double *obs,
                              size_t obs_len,
                              double *action,
                              size_t action_len);

/**
 * Encoder latent for one stacked observation.
 *
 * # Safety
 * As for [`dsr_policy_act`], with `latent` holding `latent_len` doubles.
 */
enum DsrStatus dsr_policy_encode(const struct DsrPolicy *policy,
                                 const double *obs,
                                 size_t obs_len,
                                 double *latent,
                                 size_t latent_len);

/**
 * Mean and standard deviation of the return over `episodes` episodes on
 * the checkpoint's evaluation scenes.
 *
 * # Safety
 * `policy` must be a live handle; `mean` and `std` must be writable.
 */
enum DsrStatus dsr_policy_evaluate(const struct DsrPolicy *policy,
                                   size_t episodes,
                                   uint64_t seed,
                                   double *mean,
                                   double *std);

/**
 * Runs one training seed, writing metrics and a checkpoint into `out_dir`.
 * `final_eval_mean` (nullable) receives the last evaluation return.
 *
 * # Safety
 * `config_toml` must be null or NUL-terminated; `out_dir` must be
 * NUL-terminated; `final_eval_mean` must be null or writable.
 */
enum DsrStatus dsr_train(const char *config_toml,
                         uint64_t seed,
                         const char *out_dir,
                         double *final_eval_mean);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSR_H */
