#pragma once

#include <string>

#include "core/belief.hpp"
#include "core/merge_env.hpp"
#include "core/qlearn.hpp"
#include "core/scripted.hpp"

namespace mergerl {

// Default artifact locations; CLI flags override any that are set.
struct OutputPaths {
    std::string dataset;
    std::string belief_checkpoint;
    std::string q_checkpoint;
    std::string metrics;
    std::string belief_loss_csv;
    std::string rollout;
};

// Top-level run configuration. The JSON schema is strict: an unknown key at
// any level is a config error naming the offending path. Every key is
// optional and falls back to the defaults below. Seeds never live in the
// config file; they enter through --seed flags only.
struct RunConfig {
    EnvConfig env;
    ScriptedPolicyParams scripted;
    BeliefHyper belief;
    TrainConfig train;
    OutputPaths outputs;

    void validate() const;
};

// ParseError on malformed JSON, ConfigError on schema violations.
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& cfg);

// IoError if the file cannot be read.
RunConfig load_run_config(const std::string& path);

}  // namespace mergerl
