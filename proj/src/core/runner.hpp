#pragma once

#include <cstdint>
#include <string>

#include "core/config.hpp"

namespace mergerl {

// High-level operations backing the shared-library API and the CLI. Each
// returns a single-object JSON summary for the caller to print; failures
// surface as the usual exception types (ConfigError/ParseError for bad inputs,
// IoError for filesystem trouble).

// Scripted-policy corpus; episodes <= 0 falls back to belief.dataset_episodes.
std::string run_gen_data(const RunConfig& cfg, int episodes, std::uint64_t seed,
                         const std::string& out_path);

// Supervised belief training on a JSONL dataset. loss_csv gets one row per
// epoch; when empty it defaults to "<ckpt_out>.loss.csv".
std::string run_train_belief(const RunConfig& cfg, const std::string& data_path,
                             std::uint64_t seed, const std::string& ckpt_out,
                             const std::string& loss_csv, const LogFn& log);

// Q-learning against the frozen belief model. metrics_path empty defaults to
// "<ckpt_out>.metrics.csv".
std::string run_train_dqn(const RunConfig& cfg, const std::string& belief_ckpt,
                          std::uint64_t seed, const std::string& ckpt_out,
                          const std::string& metrics_path, const LogFn& log);

// policy: "scripted", "random", or a Q-checkpoint path. belief_ckpt may be
// empty only for "scripted".
std::string run_evaluate(const RunConfig& cfg, const std::string& belief_ckpt,
                         const std::string& policy, int episodes, std::uint64_t seed);

std::string run_rollout(const RunConfig& cfg, const std::string& belief_ckpt,
                        const std::string& policy, std::uint64_t seed,
                        const std::string& out_path);

struct GradCheckSummary {
    bool pass = false;
    std::string json;
};

// component: mlp | lstm | qloss | belief | all. corrupt deliberately damages
// one analytic gradient so the failure path can be exercised end to end.
GradCheckSummary run_grad_check(const std::string& component, std::uint64_t seed, bool corrupt);

// ConfigError naming `what` when path does not exist; distinguishes a
// mistyped flag (usage error) from a genuine read failure.
void require_file(const std::string& path, const std::string& what);

}  // namespace mergerl
