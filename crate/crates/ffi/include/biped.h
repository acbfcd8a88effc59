#ifndef BIPED_H
#define BIPED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum BipedStatus {
  BIPED_OK = 0,
  BIPED_NULL_POINTER = 1,
  BIPED_INVALID_ARGUMENT = 2,
  BIPED_CONFIG_ERROR = 3,
  BIPED_CHECKPOINT_ERROR = 4,
  BIPED_DIVERGED = 5,
  BIPED_IO_ERROR = 6,
  BIPED_INTERNAL_ERROR = 7,
} BipedStatus;

/**
 * Opaque simulation environment.
 */
typedef struct BipedEnv BipedEnv;

/**
 * Opaque deterministic policy loaded from a checkpoint.
 */
typedef struct BipedPolicy BipedPolicy;

/**
 * Per-step outputs besides the observation.
 */
typedef struct BipedStepResult {
  double reward;
  /**
   * 1 when the episode ended (fall, divergence or time limit).
   */
  int32_t done;
  /**
   * 1 when the episode ended by failure rather than the time limit.
   */
  int32_t terminated;
  /**
   * Phase used during the step.
   */
  uint32_t phi;
  /**
   * Step-averaged vertical foot forces, N.
   */
  double grf_right;
  double grf_left;
} BipedStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *biped_last_error(void);

/**
 * Length of the observation vector.
 */
size_t biped_obs_dim(void);

/**
 * Creates an environment.
 *
 * `config_toml` may be null for the default configuration. `randomized`
 * selects the randomized curriculum phase (compliance, terrain and dynamics
 * randomization) instead of flat rigid ground; `terrain_peak` is the obstacle
 * height in metres used in that phase.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be a valid
 * pointer.
 */
enum BipedStatus biped_env_new(const char *config_toml,
                               int32_t randomized,
                               double terrain_peak,
                               uint64_t seed,
                               struct BipedEnv **out);

/**
 * Releases an environment; null is ignored.
 *
 * # Safety
 * `env` must be null or a handle from `biped_env_new` not freed before.
 */
void biped_env_free(struct BipedEnv *env);

/**
 * Action length expected by `biped_env_step` (6, or 7 with clock control).
 *
 * # Safety
 * `env` must be null or a live handle; null yields 0.
 */
size_t biped_env_action_dim(const struct BipedEnv *env);

/**
 * Starts a new episode and writes the first observation.
 *
 * # Safety
 * `env` must be a live handle and `obs_out` must hold `obs_len` doubles.
 */
enum BipedStatus biped_env_reset(struct BipedEnv *env, double *obs_out, size_t obs_len);

/**
 * Advances one control step (25 physics substeps).
 *
 * # Safety
 * `env` must be a live handle, `action` must hold `action_len` doubles,
 * `obs_out` `obs_len` doubles, and `result` must be valid or null.
 */
enum BipedStatus biped_env_step(struct BipedEnv *env,
                                const double *action,
                                size_t action_len,
                                double *obs_out,
                                size_t obs_len,
                                struct BipedStepResult *result);

/**
 * Loads a checkpoint as a deterministic policy.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BipedStatus biped_policy_load(const char *path, struct BipedPolicy **out);

/**
 * Releases a policy; null is ignored.
 *
 * # Safety
 * `policy` must be null or a handle from `biped_policy_load` not freed before.
 */
void biped_policy_free(struct BipedPolicy *policy);

/**
 * Number of actions the policy produces; 0 for null.
 *
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t biped_policy_action_dim(const struct BipedPolicy *policy);

/**
 * Mean action for one observation.
 *
 * # Safety
 * `policy` must be a live handle; `obs` must hold `obs_len` doubles and
 * `action_out` `action_len` doubles.
 */
enum BipedStatus biped_policy_act(const struct BipedPolicy *policy,
                                  const double *obs,
                                  size_t obs_len,
                                  double *action_out,
                                  size_t action_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIPED_H */
