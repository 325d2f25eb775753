#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "core/adam.hpp"
#include "core/belief.hpp"
#include "core/checkpoint.hpp"
#include "core/merge_env.hpp"
#include "core/nn.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace mergerl {

// Physical action box. Dimension 0 is acceleration, dimension 1 is steering.
// The Q-head works in normalized coordinates a_norm = (a - mid) / half so the
// quadratic's curvature scale is comparable across dimensions.
struct ActionBounds {
    double lo[2] = {-4.5, -0.262};
    double hi[2] = {3.0, 0.262};

    static ActionBounds from_env(const EnvConfig& cfg);

    double mid(int d) const { return 0.5 * (lo[d] + hi[d]); }
    double half(int d) const { return 0.5 * (hi[d] - lo[d]); }
    double normalize(int d, double v) const { return (v - mid(d)) / half(d); }
    double denormalize(int d, double v) const { return mid(d) + half(d) * v; }
    std::array<double, 2> normalize(const Action& a) const;
    Action denormalize(const std::array<double, 2>& n) const;
};

// Q(s,a) = sum_d A_d(s) * (B_d(s) - a_d)^2 + C(s) in normalized action space,
// with A_d(s) = -softplus(A_raw_d(s)) - eps_a <= -eps_a. Strict per-dimension
// concavity makes the in-bounds argmax the clamp of B(s).
struct QParams {
    Mlp trunk;              // state -> width tanh -> width tanh
    DenseLayer head_a_raw;  // width -> 2 linear
    DenseLayer head_b;      // width -> 2 linear
    DenseLayer head_c;      // width -> 1 linear
    double eps_a = 1e-3;
    ActionBounds bounds;

    static QParams init(std::size_t state_size, std::size_t trunk_width,
                        const ActionBounds& bounds, std::uint64_t seed);

    std::size_t state_size() const { return trunk.in_size(); }
    std::size_t trunk_width() const { return trunk.out_size(); }
    void validate() const;
    ParamRefs param_refs();
    NamedTensors zero_grads() const;
};

// Head values after the concavity transform, in normalized action space.
struct QHeads {
    std::array<double, 2> a{};  // curvature, always <= -eps_a
    std::array<double, 2> b{};  // unclamped argmax
    double c = 0.0;
};

struct QCache {
    MlpCache trunk;
    std::vector<double> trunk_out;
    DenseCache a_raw, b, c;
    std::array<double, 2> a_raw_out{};
    QHeads heads;
};

QHeads q_heads(const QParams& p, const std::vector<double>& s, QCache& cache);
double q_from_heads(const QHeads& h, const std::array<double, 2>& a_norm);

// Throws NumericError if s contains a non-finite component.
double q_value(const QParams& p, const std::vector<double>& s, const Action& a);
double q_value_normalized(const QParams& p, const std::vector<double>& s,
                          const std::array<double, 2>& a_norm);

// Closed-form bounded argmax: per-dimension clamp of B(s) to the action box.
Action best_action(const QParams& p, const std::vector<double>& s);
// Q at best_action(p, s), sharing one trunk evaluation.
double max_q(const QParams& p, const std::vector<double>& s);

// best_action plus independent zero-mean Gaussian noise per dimension with
// std = noise_scale * half-range, clamped back into the box.
Action select_action(const QParams& p, const std::vector<double>& s, double noise_scale,
                     Rng& rng);

// r if terminal, else r + gamma * max_q(target, s_next).
double target_value(const QParams& target, double r, const std::vector<double>& s_next,
                    bool terminal, double gamma);

struct Transition {
    std::vector<double> s;
    Action a;
    double r = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
};

// Fixed-capacity ring buffer with strict FIFO eviction and uniform sampling
// with replacement.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void push(Transition t);
    // n uniform draws with replacement; ContractError if size() < n.
    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }
    // Logical index 0 is the oldest element still stored.
    const Transition& at(std::size_t logical) const;

private:
    std::vector<Transition> buf_;
    std::size_t capacity_;
    std::size_t cursor_ = 0;
};

// Mean squared target residual over the batch; gradients with respect to
// theta accumulate into grads. Targets are computed from `target` and never
// propagate gradients. ContractError on an empty batch. When mean_abs_q is
// non-null it receives the mean |Q(s_i, a_i)| of the batch.
double batch_loss(const QParams& theta, const QParams& target,
                  const std::vector<const Transition*>& batch, double gamma,
                  NamedTensors& grads, double* mean_abs_q = nullptr);

struct TrainConfig {
    double gamma = 0.95;
    int target_sync = 500;           // C, in train steps
    int minibatch = 32;              // N
    int episodes = 2000;             // M
    std::size_t replay_capacity = 100000;
    int warmup = 1000;               // stored transitions before learning starts
    double learning_rate = 1e-3;
    double noise_start = 1.0;        // fraction of half-range
    double noise_end = 0.05;
    double anneal_fraction = 0.8;    // of the env-step budget
    std::int64_t total_env_steps = 0;  // 0: use episodes * env horizon
    int eval_period = 200;           // episodes between periodic evaluations, 0 = off
    int eval_episodes = 20;
    std::size_t trunk_width = 64;
    std::uint64_t seed = 0;

    void validate() const;
    std::int64_t env_step_budget(const EnvConfig& env_cfg) const;
};

// Exploration noise scale after `step` env steps out of `total`: linear from
// noise_start to noise_end over the first anneal_fraction of the budget.
double noise_scale_at(const TrainConfig& cfg, std::int64_t step, std::int64_t total);

// One uniform minibatch and one Adam descent step. Returns false without
// touching any state while replay.size() < max(minibatch, warmup); otherwise
// increments step_counter. loss_out/mean_abs_q_out may be null.
bool train_step(QParams& theta, AdamState& adam, const QParams& target, ReplayMemory& replay,
                const TrainConfig& cfg, Rng& rng, std::int64_t& step_counter, double* loss_out,
                double* mean_abs_q_out);

// When step is a multiple of period, target becomes a deep copy of theta.
void sync_target(QParams& theta, QParams& target, std::int64_t step, int period);

struct EvalMetrics {
    double success_rate = 0.0;
    double collision_rate = 0.0;
    double timeout_rate = 0.0;
    double offroad_rate = 0.0;
    double mean_return = 0.0;
    double mean_abs_accel = 0.0;
    double mean_abs_steer = 0.0;
    int episodes = 0;
};

// A policy factory returns a fresh per-episode policy; the returned callable
// may carry mutable episode-local state (belief recurrence, latches).
using PolicyFn = std::function<Action(const Observation&)>;
using PolicyFactory = std::function<PolicyFn()>;

// Seeded rollouts without exploration noise. Episode k uses env seed
// sub_seed(seed, k), so metrics are deterministic in (configs, seed).
EvalMetrics evaluate_policy(const EnvConfig& env_cfg, const PolicyFactory& make_policy,
                            int n_episodes, std::uint64_t seed);

// Greedy Q-policy rolled out through the frozen belief recurrence.
EvalMetrics evaluate(const EnvConfig& env_cfg, const BeliefParams& belief, const QParams& theta,
                     int n_episodes, std::uint64_t seed);
PolicyFactory q_policy(const BeliefParams& belief, const QParams& theta);

struct EpisodeRecord {
    int episode = 0;  // 1-based
    int steps = 0;
    double episode_return = 0.0;
    TerminalEvent event = TerminalEvent::Running;
};

struct TrainResult {
    QParams theta;
    std::vector<EpisodeRecord> episodes;
    std::int64_t env_steps = 0;
    std::int64_t train_steps = 0;
    EvalMetrics final_eval;  // eval_episodes rollouts after the last episode
};

// Header of the per-step metrics stream written by run_training.
std::string metrics_csv_header();

// Full training loop: for each episode, advance the frozen belief recurrence,
// pick noisy actions, store transitions, and take one train step per env step
// once warmed up, syncing the target every target_sync train steps. Writes one
// metrics row per env step to metrics_out when non-null. Deterministic in
// (env_cfg, belief, cfg).
TrainResult run_training(const EnvConfig& env_cfg, const BeliefParams& belief,
                         const TrainConfig& cfg, std::ostream* metrics_out,
                         const LogFn& log = nullptr);

// Checkpoint round trip; bounds and eps_a travel in metadata.
Checkpoint q_to_checkpoint(const QParams& p);
QParams q_from_checkpoint(const Checkpoint& ck);

}  // namespace mergerl
