#ifndef HMAMP_H
#define HMAMP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Length of the flat observation vector.
 */
#define HMAMP_OBS_DIM 14

/**
 * Number of arm joints (action length).
 */
#define HMAMP_NUM_JOINTS 3

typedef enum HmampStatus {
  HMAMP_STATUS_OK = 0,
  HMAMP_STATUS_NULL_POINTER = 1,
  HMAMP_STATUS_INVALID_ARGUMENT = 2,
  HMAMP_STATUS_CONFIG = 3,
  HMAMP_STATUS_CONTRACT = 4,
  HMAMP_STATUS_IO = 5,
  HMAMP_STATUS_CHECKPOINT = 6,
  HMAMP_STATUS_PLANNING = 7,
  HMAMP_STATUS_UNDEFINED_METRIC = 8,
  HMAMP_STATUS_PANIC = 9,
} HmampStatus;

typedef enum HmampTermination {
  HMAMP_TERMINATION_RUNNING = 0,
  HMAMP_TERMINATION_TASK_DONE = 1,
  HMAMP_TERMINATION_COLLISION = 2,
  HMAMP_TERMINATION_TIMEOUT = 3,
} HmampTermination;

/**
 * Opaque environment handle.
 */
typedef struct HmampEnv HmampEnv;

/**
 * Opaque policy handle.
 */
typedef struct HmampPolicy HmampPolicy;

/**
 * Result of one control step.
 */
typedef struct HmampStep {
  enum HmampTermination termination;
  /**
   * Nonzero when the hammer struck the nail this step.
   */
  int contact;
  double force_x;
  double force_y;
  double force_norm;
} HmampStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (NUL-terminated, truncated to `len`) into
 * `buf` and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t hmamp_last_error(char *buf, size_t len);

/**
 * Creates an environment with the default configuration, reset with `seed`.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum HmampStatus hmamp_env_new(uint64_t seed, struct HmampEnv **out);

/**
 * Creates an environment from the `[env]` section of an experiment
 * configuration document.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` valid for one write.
 */
enum HmampStatus hmamp_env_from_config(const char *config_toml,
                                       uint64_t seed,
                                       struct HmampEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from `hmamp_env_new`, freed at most once.
 */
void hmamp_env_free(struct HmampEnv *env);

/**
 * Starts a new episode and writes the first observation.
 *
 * # Safety
 * `env` must be a live handle; `obs_out` valid for `HMAMP_OBS_DIM` doubles.
 */
enum HmampStatus hmamp_env_reset(struct HmampEnv *env, uint64_t seed, double *obs_out);

/**
 * Advances one control step toward the PD joint targets in `action`.
 *
 * # Safety
 * `env` must be a live handle; `action` valid for `HMAMP_NUM_JOINTS`
 * doubles; `obs_out` for `HMAMP_OBS_DIM`; `step_out` for one `HmampStep`.
 */
enum HmampStatus hmamp_env_step(struct HmampEnv *env,
                                const double *action,
                                double *obs_out,
                                struct HmampStep *step_out);

/**
 * Writes the hammer-head (`x_f`) and nail-head (`x_c`) positions as
 * `[x_f.x, x_f.y, x_c.x, x_c.y]`.
 *
 * # Safety
 * `env` must be a live handle; `out` valid for 4 doubles.
 */
enum HmampStatus hmamp_env_keypoints(const struct HmampEnv *env, double *out);

/**
 * Loads a policy checkpoint for the default environment geometry.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for one write.
 */
enum HmampStatus hmamp_policy_load(const char *path, struct HmampPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle from `hmamp_policy_load`, freed at most once.
 */
void hmamp_policy_free(struct HmampPolicy *policy);

/**
 * Deterministic PD joint targets for an observation.
 *
 * # Safety
 * `policy` must be a live handle; `obs` valid for `HMAMP_OBS_DIM` doubles;
 * `action_out` for `HMAMP_NUM_JOINTS`.
 */
enum HmampStatus hmamp_policy_act(const struct HmampPolicy *policy,
                                  const double *obs,
                                  double *action_out);

/**
 * Style reward of a discriminator score under the default weights.
 */
double hmamp_style_reward(double d);

/**
 * Goal reward under the default weights; `contact = 0` ignores `force_norm`.
 */
double hmamp_goal_reward(int contact,
                         double force_norm,
                         double xf_x,
                         double xf_y,
                         double xc_x,
                         double xc_y);

/**
 * Combined reward under the default weights.
 */
double hmamp_total_reward(double r_g, double r_s);

/**
 * Discrete Fréchet distance between two paths given as interleaved
 * `x, y` pairs (`na` and `nb` points).
 *
 * # Safety
 * `a` must be valid for `2·na` doubles, `b` for `2·nb`, `out` for one.
 */
enum HmampStatus hmamp_frechet_distance(const double *a,
                                        size_t na,
                                        const double *b,
                                        size_t nb,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMAMP_H */
