#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/lstm.hpp"
#include "core/nn.hpp"
#include "core/norm.hpp"

namespace mergerl {

// LSTM environment model. The state module folds each observation (plus the
// previously executed action) into a fixed-size internal state; the
// observation head predicts the next observation from that state and the
// current action, which is the supervised training signal.
struct BeliefHyper {
    std::size_t hidden = 64;          // H
    std::size_t obs_head_width = 64;
    int epochs = 10;
    int truncation = 32;              // BPTT window K
    int batch_windows = 8;            // windows per Adam step
    double learning_rate = 1e-3;
    double holdout_frac = 0.1;
    int dataset_episodes = 2000;      // default corpus size for the CLI

    void validate() const;
};

// LSTM input layout: 9 normalized observation features + 2 normalized action
// features.
inline constexpr std::size_t kBeliefInputSize = 11;

struct BeliefParams {
    LstmCellParams lstm;  // X=11, H=hidden
    Mlp obs_head;         // H+2 -> width tanh -> 9 linear
    NormStats norm;

    static BeliefParams init(const BeliefHyper& hyper, std::uint64_t seed);

    std::size_t hidden() const { return lstm.hidden_size; }
    ParamRefs param_refs();
    NamedTensors zero_grads() const;
};

struct BeliefState {
    std::vector<double> s;  // LSTM hidden, the internal state fed to the Q-network
    std::vector<double> c;  // carried cell memory
    Action a_prev{0.0, 0.0};
};

BeliefState belief_init(const BeliefParams& params);

// Advances the recurrence on o_t; the result's .s is the internal state s_t.
// a_prev of the result is left equal to the input state's value; the caller
// overwrites it once the action for this step is chosen.
BeliefState belief_step(const BeliefParams& params, const BeliefState& state,
                        const Observation& o_t);

// obs_head([state.s ; normalize(a_prev)]) de-normalized to physical units.
Observation predict_observation(const BeliefParams& params, const BeliefState& state,
                                const Action& a_prev);

struct BeliefWindowResult {
    double loss = 0.0;           // sum of squared normalized residuals
    std::size_t predictions = 0;
};

// Forward pass over episode steps [t0, t1), making a one-step prediction at
// every step that has a successor. h and c carry the recurrent values across
// consecutive windows and are updated in place. When grads is non-null the
// loss gradient is accumulated into it (truncated BPTT: no flow past t0).
BeliefWindowResult belief_window(const BeliefParams& params, const Episode& ep, std::size_t t0,
                                 std::size_t t1, std::vector<double>& h, std::vector<double>& c,
                                 NamedTensors* grads);

struct BeliefEval {
    std::array<double, 9> model_per_feature{};
    std::array<double, 9> persistence_per_feature{};
    double model_mse = 0.0;
    double persistence_mse = 0.0;
    std::size_t predictions = 0;
};

// One-step prediction error in normalized space on the given episodes,
// against the persistence baseline o_hat_{i+1} = o_i.
BeliefEval eval_belief(const BeliefParams& params, const TrajectoryDataset& ds,
                       const std::vector<std::size_t>& episode_indices);

struct BeliefTrainReport {
    std::vector<double> train_loss;    // per epoch, mean squared residual component
    std::vector<double> holdout_loss;
    std::vector<std::size_t> train_episodes;
    std::vector<std::size_t> holdout_episodes;
    BeliefEval final_eval;
};

using LogFn = std::function<void(const std::string&)>;

// Supervised training by truncated BPTT with Adam; deterministic in
// (dataset, hyper, seed). Requires at least 2 episodes.
BeliefParams train_belief(const TrajectoryDataset& ds, const BeliefHyper& hyper,
                          std::uint64_t seed, BeliefTrainReport* report = nullptr,
                          const LogFn& log = nullptr);

Checkpoint belief_to_checkpoint(const BeliefParams& params);
BeliefParams belief_from_checkpoint(const Checkpoint& ck);

}  // namespace mergerl
