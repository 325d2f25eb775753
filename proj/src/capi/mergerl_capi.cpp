#include "mergerl.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/runner.hpp"

namespace {

thread_local std::string g_last_error = "no error";

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

mrl_status fail(mrl_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

// Maps the library's exception taxonomy onto the status enum. ParseError is a
// config-class failure: the caller pointed a flag at a malformed file.
template <typename Fn>
mrl_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const mergerl::ConfigError& e) {
        return fail(MRL_CONFIG_ERROR, e.what());
    } catch (const mergerl::ParseError& e) {
        return fail(MRL_CONFIG_ERROR, e.what());
    } catch (const mergerl::IoError& e) {
        return fail(MRL_IO_ERROR, e.what());
    } catch (const std::exception& e) {
        return fail(MRL_RUNTIME_ERROR, e.what());
    }
}

mrl_status set_summary(char** summary_json, const std::string& text) {
    if (summary_json) {
        *summary_json = dup_string(text);
        if (!*summary_json) return fail(MRL_RUNTIME_ERROR, "out of memory");
    }
    return MRL_OK;
}

mergerl::LogFn stderr_log(int verbose) {
    if (!verbose) return nullptr;
    return [](const std::string& line) {
        std::fprintf(stderr, "%s\n", line.c_str());
        std::fflush(stderr);
    };
}

std::string arg(const char* s) { return s ? std::string(s) : std::string(); }

}  // namespace

struct mrl_config {
    mergerl::RunConfig cfg;
};

struct mrl_env {
    mergerl::MergeEnv env;
};

extern "C" {

const char* mrl_last_error(void) { return g_last_error.c_str(); }

const char* mrl_version(void) { return "0.1.0"; }

void mrl_string_free(char* s) { std::free(s); }

mrl_status mrl_config_default(mrl_config** out) {
    if (!out) return fail(MRL_CONFIG_ERROR, "mrl_config_default: out is NULL");
    return guarded([&]() {
        *out = new mrl_config{};
        return MRL_OK;
    });
}

mrl_status mrl_config_from_json(const char* json_text, mrl_config** out) {
    if (!out || !json_text)
        return fail(MRL_CONFIG_ERROR, "mrl_config_from_json: NULL argument");
    return guarded([&]() {
        *out = new mrl_config{mergerl::run_config_from_json(json_text)};
        return MRL_OK;
    });
}

mrl_status mrl_config_load(const char* path, mrl_config** out) {
    if (!out || !path) return fail(MRL_CONFIG_ERROR, "mrl_config_load: NULL argument");
    return guarded([&]() {
        mergerl::require_file(path, "config file");
        *out = new mrl_config{mergerl::load_run_config(path)};
        return MRL_OK;
    });
}

mrl_status mrl_config_to_json(const mrl_config* cfg, char** json_out) {
    if (!cfg || !json_out) return fail(MRL_CONFIG_ERROR, "mrl_config_to_json: NULL argument");
    return guarded([&]() { return set_summary(json_out, mergerl::run_config_to_json(cfg->cfg)); });
}

void mrl_config_free(mrl_config* cfg) { delete cfg; }

mrl_status mrl_gen_data(const mrl_config* cfg, int episodes, uint64_t seed,
                        const char* out_path, char** summary_json) {
    if (!cfg) return fail(MRL_CONFIG_ERROR, "mrl_gen_data: cfg is NULL");
    return guarded([&]() {
        return set_summary(summary_json,
                           mergerl::run_gen_data(cfg->cfg, episodes, seed, arg(out_path)));
    });
}

mrl_status mrl_train_belief(const mrl_config* cfg, const char* data_path, uint64_t seed,
                            const char* ckpt_out, const char* loss_csv, int verbose,
                            char** summary_json) {
    if (!cfg) return fail(MRL_CONFIG_ERROR, "mrl_train_belief: NULL config");
    return guarded([&]() {
        return set_summary(summary_json,
                           mergerl::run_train_belief(cfg->cfg, arg(data_path), seed, arg(ckpt_out),
                                                     arg(loss_csv), stderr_log(verbose)));
    });
}

mrl_status mrl_train_dqn(const mrl_config* cfg, const char* belief_ckpt, uint64_t seed,
                         const char* ckpt_out, const char* metrics_path, int verbose,
                         char** summary_json) {
    if (!cfg) return fail(MRL_CONFIG_ERROR, "mrl_train_dqn: NULL config");
    return guarded([&]() {
        return set_summary(summary_json,
                           mergerl::run_train_dqn(cfg->cfg, arg(belief_ckpt), seed, arg(ckpt_out),
                                                  arg(metrics_path), stderr_log(verbose)));
    });
}

mrl_status mrl_evaluate(const mrl_config* cfg, const char* belief_ckpt, const char* policy,
                        int episodes, uint64_t seed, char** summary_json) {
    if (!cfg || !policy) return fail(MRL_CONFIG_ERROR, "mrl_evaluate: NULL argument");
    return guarded([&]() {
        return set_summary(summary_json, mergerl::run_evaluate(cfg->cfg, arg(belief_ckpt),
                                                               policy, episodes, seed));
    });
}

mrl_status mrl_rollout(const mrl_config* cfg, const char* belief_ckpt, const char* policy,
                       uint64_t seed, const char* out_path, char** summary_json) {
    if (!cfg || !policy) return fail(MRL_CONFIG_ERROR, "mrl_rollout: NULL argument");
    return guarded([&]() {
        return set_summary(summary_json, mergerl::run_rollout(cfg->cfg, arg(belief_ckpt),
                                                              policy, seed, arg(out_path)));
    });
}

mrl_status mrl_grad_check(const char* component, uint64_t seed, int corrupt,
                          char** summary_json) {
    return guarded([&]() -> mrl_status {
        const mergerl::GradCheckSummary summary =
            mergerl::run_grad_check(arg(component), seed, corrupt != 0);
        const mrl_status set = set_summary(summary_json, summary.json);
        if (set != MRL_OK) return set;
        if (!summary.pass) return fail(MRL_CHECK_FAILED, "gradient check exceeded tolerance");
        return MRL_OK;
    });
}

mrl_status mrl_env_create(const mrl_config* cfg, uint64_t seed, mrl_env** out) {
    if (!cfg || !out) return fail(MRL_CONFIG_ERROR, "mrl_env_create: NULL argument");
    return guarded([&]() {
        *out = new mrl_env{mergerl::MergeEnv(cfg->cfg.env, seed)};
        return MRL_OK;
    });
}

mrl_status mrl_env_observe(const mrl_env* env, double obs[9]) {
    if (!env || !obs) return fail(MRL_CONFIG_ERROR, "mrl_env_observe: NULL argument");
    const auto arr = env->env.observation().as_array();
    for (int i = 0; i < 9; ++i) obs[i] = arr[static_cast<std::size_t>(i)];
    return MRL_OK;
}

mrl_status mrl_env_step(mrl_env* env, double accel, double steer, double obs[9],
                        double* reward, int* terminal, char event[16]) {
    if (!env) return fail(MRL_CONFIG_ERROR, "mrl_env_step: env is NULL");
    return guarded([&]() {
        const mergerl::StepResult res = env->env.step({accel, steer});
        if (obs) {
            const auto arr = res.observation.as_array();
            for (int i = 0; i < 9; ++i) obs[i] = arr[static_cast<std::size_t>(i)];
        }
        if (reward) *reward = res.reward;
        if (terminal) *terminal = res.terminal ? 1 : 0;
        if (event) std::snprintf(event, 16, "%s", mergerl::event_name(res.event));
        return MRL_OK;
    });
}

void mrl_env_free(mrl_env* env) { delete env; }

}  // extern "C"
