#ifndef AAC_H
#define AAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Step flag bits written by [`aac_env_step`].
 */
#define AAC_FLAG_TERMINATED 1

#define AAC_FLAG_TRUNCATED 2

#define AAC_FLAG_SUCCESS 4

typedef enum AacStatus {
  AAC_STATUS_OK = 0,
  AAC_STATUS_NULL_POINTER = 1,
  AAC_STATUS_DIMENSION_MISMATCH = 2,
  AAC_STATUS_NON_FINITE = 3,
  AAC_STATUS_INVALID_ARGUMENT = 4,
  AAC_STATUS_IO = 5,
  AAC_STATUS_CHECKPOINT = 6,
  AAC_STATUS_PANIC = 7,
  AAC_STATUS_INTERNAL = 8,
} AacStatus;

typedef enum AacClassification {
  AAC_CLASSIFICATION_STABLE = 0,
  AAC_CLASSIFICATION_MARGINAL = 1,
  AAC_CLASSIFICATION_UNSTABLE = 2,
} AacClassification;

typedef struct AacAdviser AacAdviser;

typedef struct AacEnv AacEnv;

typedef struct AacPolicy AacPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `aac_*` call on this thread.
 */
const char *aac_last_error_message(void);

/**
 * Create a PID adviser for goals of length `goal_dim`. Pass `INFINITY` as
 * `integral_clamp` for no clamp.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AacStatus aac_adviser_new(double kp,
                               double ki,
                               double kd,
                               size_t goal_dim,
                               double dt,
                               double integral_clamp,
                               struct AacAdviser **out);

/**
 * # Safety
 * `adviser` must come from [`aac_adviser_new`] and not be used afterwards.
 */
void aac_adviser_free(struct AacAdviser *adviser);

/**
 * Clear the integral and derivative memory.
 *
 * # Safety
 * `adviser` must be a live handle.
 */
enum AacStatus aac_adviser_reset(struct AacAdviser *adviser);

/**
 * Advance the adviser by one step on error `e` and write the synthetic error.
 *
 * # Safety
 * `e` and `eps_out` must each point to `len` doubles.
 */
enum AacStatus aac_adviser_fake_error(struct AacAdviser *adviser,
                                      const double *e,
                                      size_t len,
                                      double *eps_out);

/**
 * Create an environment by name (`point_mass`, `planar_arm`, `quad_vel`,
 * `line1d`) with default physics.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum AacStatus aac_env_new(const char *name, size_t max_steps, struct AacEnv **out);

/**
 * # Safety
 * `env` must come from [`aac_env_new`] and not be used afterwards.
 */
void aac_env_free(struct AacEnv *env);

/**
 * # Safety
 * `env` must be live; each output pointer must be writable.
 */
enum AacStatus aac_env_dims(const struct AacEnv *env,
                            size_t *obs_dim,
                            size_t *goal_dim,
                            size_t *action_dim);

/**
 * Reset with `seed`, writing the observation (`obs_dim`), desired goal and
 * achieved goal (`goal_dim` each).
 *
 * # Safety
 * Output buffers must hold the sizes reported by [`aac_env_dims`].
 */
enum AacStatus aac_env_reset(struct AacEnv *env,
                             uint64_t seed,
                             double *obs,
                             double *desired,
                             double *achieved);

/**
 * Apply `action` for one step. `flags` receives a bit set of
 * `AAC_FLAG_TERMINATED`, `AAC_FLAG_TRUNCATED` and `AAC_FLAG_SUCCESS`.
 *
 * # Safety
 * `action` must point to `action_len` doubles; outputs as for [`aac_env_reset`].
 */
enum AacStatus aac_env_step(struct AacEnv *env,
                            const double *action,
                            size_t action_len,
                            double *obs,
                            double *desired,
                            double *achieved,
                            double *reward,
                            uint32_t *flags);

/**
 * Load the policy network from an agent checkpoint, scaled to `env`'s
 * action box. The policy acts deterministically (squashed mean).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `env` live; `out` writable.
 */
enum AacStatus aac_policy_load(const char *path, const struct AacEnv *env, struct AacPolicy **out);

/**
 * # Safety
 * `policy` must come from [`aac_policy_load`] and not be used afterwards.
 */
void aac_policy_free(struct AacPolicy *policy);

/**
 * # Safety
 * `policy` must be live; `s_e` must point to `len` doubles and `action_out`
 * to `action_len` doubles.
 */
enum AacStatus aac_policy_act(struct AacPolicy *policy,
                              const double *s_e,
                              size_t len,
                              double *action_out,
                              size_t action_len);

/**
 * Routh classification of `s^3 + kd'·s^2 + kp'·s + ki`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AacStatus aac_routh_classify(double kp_eff,
                                  double kd_eff,
                                  double ki,
                                  enum AacClassification *out);

/**
 * Largest real part among the roots of the same cubic.
 *
 * # Safety
 * `out` must be writable.
 */
enum AacStatus aac_max_root_real_part(double kp_eff, double kd_eff, double ki, double *out);

/**
 * Iterate `e ← (I - B)·e` for an `n × n` row-major `B`. Writes `ρ(I - B)` and
 * the `iterations + 1` error norms starting with `‖e0‖`.
 *
 * # Safety
 * `b` must point to `n*n` doubles, `e0` to `n`, `norms_out` to
 * `iterations + 1`; `spectral_radius` must be writable.
 */
enum AacStatus aac_contraction(const double *b,
                               size_t n,
                               const double *e0,
                               size_t iterations,
                               double *spectral_radius,
                               double *norms_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AAC_H */
