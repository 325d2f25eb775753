/* C API for the merge reinforcement-learning stack.
 *
 * All functions return mrl_status; on any non-OK status mrl_last_error()
 * holds a thread-local human-readable message. Strings returned through
 * char** out-parameters are heap-allocated and must be released with
 * mrl_string_free(). Handles are opaque and single-owner.
 */
#ifndef MERGERL_H
#define MERGERL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mrl_status {
    MRL_OK = 0,
    MRL_CHECK_FAILED = 1,  /* a verification (e.g. gradient check) did not pass */
    MRL_CONFIG_ERROR = 2,  /* bad usage, bad config, malformed input file */
    MRL_IO_ERROR = 3,      /* filesystem read/write failure */
    MRL_RUNTIME_ERROR = 4  /* contract or numeric failure inside the library */
} mrl_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* mrl_last_error(void);

const char* mrl_version(void);

void mrl_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Configuration                                                       */

typedef struct mrl_config mrl_config;

/* Built-in defaults. */
mrl_status mrl_config_default(mrl_config** out);
/* Strict-schema JSON; unknown keys are rejected. */
mrl_status mrl_config_from_json(const char* json_text, mrl_config** out);
mrl_status mrl_config_load(const char* path, mrl_config** out);
mrl_status mrl_config_to_json(const mrl_config* cfg, char** json_out);
void mrl_config_free(mrl_config* cfg);

/* ------------------------------------------------------------------ */
/* High-level runs (the CLI subcommands)                               */
/* Each writes its artifacts to disk and returns a JSON summary.       */

/* Scripted-policy dataset; episodes <= 0 uses the configured default. */
mrl_status mrl_gen_data(const mrl_config* cfg, int episodes, uint64_t seed,
                        const char* out_path, char** summary_json);

/* loss_csv NULL/empty derives "<ckpt_out>.loss.csv". verbose != 0 prints
 * progress lines to stderr. */
mrl_status mrl_train_belief(const mrl_config* cfg, const char* data_path, uint64_t seed,
                            const char* ckpt_out, const char* loss_csv, int verbose,
                            char** summary_json);

/* metrics_path NULL/empty derives "<ckpt_out>.metrics.csv". */
mrl_status mrl_train_dqn(const mrl_config* cfg, const char* belief_ckpt, uint64_t seed,
                         const char* ckpt_out, const char* metrics_path, int verbose,
                         char** summary_json);

/* policy: "scripted", "random", or a Q-checkpoint path. belief_ckpt may be
 * NULL only for "scripted". */
mrl_status mrl_evaluate(const mrl_config* cfg, const char* belief_ckpt, const char* policy,
                        int episodes, uint64_t seed, char** summary_json);

mrl_status mrl_rollout(const mrl_config* cfg, const char* belief_ckpt, const char* policy,
                       uint64_t seed, const char* out_path, char** summary_json);

/* component: "mlp", "lstm", "qloss", "belief" or "all". Returns
 * MRL_CHECK_FAILED when any max relative error exceeds 1e-5. corrupt != 0
 * damages one analytic gradient on purpose (failure-path test hook). */
mrl_status mrl_grad_check(const char* component, uint64_t seed, int corrupt,
                          char** summary_json);

/* ------------------------------------------------------------------ */
/* Environment handle (for embedding the simulator directly)           */

typedef struct mrl_env mrl_env;

mrl_status mrl_env_create(const mrl_config* cfg, uint64_t seed, mrl_env** out);

/* obs receives the 9-variable observation
 * (v_m, p_m, phi_m, l_m, r_m, v_f, p_f, v_l, p_l). */
mrl_status mrl_env_observe(const mrl_env* env, double obs[9]);

/* Advances one step. terminal becomes nonzero on the episode-ending step;
 * event receives "running", "merged", "collision", "off_road" or "timeout"
 * (buffer of at least 16 bytes). Stepping a finished episode is an error. */
mrl_status mrl_env_step(mrl_env* env, double accel, double steer, double obs[9],
                        double* reward, int* terminal, char event[16]);

void mrl_env_free(mrl_env* env);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MERGERL_H */
