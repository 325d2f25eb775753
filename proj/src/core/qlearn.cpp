#include "core/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/trajectory.hpp"

namespace mergerl {

ActionBounds ActionBounds::from_env(const EnvConfig& cfg) {
    ActionBounds b;
    b.lo[0] = cfg.accel_min;
    b.hi[0] = cfg.accel_max;
    b.lo[1] = cfg.steer_min;
    b.hi[1] = cfg.steer_max;
    return b;
}

std::array<double, 2> ActionBounds::normalize(const Action& a) const {
    return {normalize(0, a.accel), normalize(1, a.steer)};
}

Action ActionBounds::denormalize(const std::array<double, 2>& n) const {
    return {denormalize(0, n[0]), denormalize(1, n[1])};
}

QParams QParams::init(std::size_t state_size, std::size_t trunk_width,
                      const ActionBounds& bounds, std::uint64_t seed) {
    QParams p;
    p.trunk = Mlp({state_size, trunk_width, trunk_width}, {Activation::Tanh, Activation::Tanh});
    p.head_a_raw = DenseLayer(2, trunk_width, Activation::Linear);
    p.head_b = DenseLayer(2, trunk_width, Activation::Linear);
    p.head_c = DenseLayer(1, trunk_width, Activation::Linear);
    p.bounds = bounds;
    Rng rng(sub_seed(seed, 0x51494e49));
    p.trunk.init_xavier(rng);
    p.head_a_raw.init_xavier(rng);
    p.head_b.init_xavier(rng);
    p.head_c.init_xavier(rng);
    return p;
}

void QParams::validate() const {
    trunk.validate();
    if (head_a_raw.in_size() != trunk.out_size() || head_b.in_size() != trunk.out_size() ||
        head_c.in_size() != trunk.out_size())
        throw ShapeError("q-params: head input sizes do not match the trunk output");
    if (head_a_raw.out_size() != 2 || head_b.out_size() != 2 || head_c.out_size() != 1)
        throw ShapeError("q-params: heads must emit 2/2/1 values");
    if (!(eps_a > 0)) throw ConfigError("q-params: eps_a must be positive");
    for (int d = 0; d < 2; ++d)
        if (!(bounds.lo[d] < bounds.hi[d]))
            throw ConfigError("q-params: action bounds must satisfy lo < hi");
}

ParamRefs QParams::param_refs() {
    ParamRefs refs = trunk.param_refs("trunk/");
    refs.push_back({"head_a/w", &head_a_raw.weights});
    refs.push_back({"head_a/b", &head_a_raw.bias});
    refs.push_back({"head_b/w", &head_b.weights});
    refs.push_back({"head_b/b", &head_b.bias});
    refs.push_back({"head_c/w", &head_c.weights});
    refs.push_back({"head_c/b", &head_c.bias});
    return refs;
}

NamedTensors QParams::zero_grads() const {
    NamedTensors grads = trunk.zero_grads("trunk/");
    grads["head_a/w"] = Tensor::zeros_like(head_a_raw.weights);
    grads["head_a/b"] = Tensor::zeros_like(head_a_raw.bias);
    grads["head_b/w"] = Tensor::zeros_like(head_b.weights);
    grads["head_b/b"] = Tensor::zeros_like(head_b.bias);
    grads["head_c/w"] = Tensor::zeros_like(head_c.weights);
    grads["head_c/b"] = Tensor::zeros_like(head_c.bias);
    return grads;
}

QHeads q_heads(const QParams& p, const std::vector<double>& s, QCache& cache) {
    for (double v : s)
        if (!std::isfinite(v)) throw NumericError("q_heads: non-finite state component");
    mlp_forward(p.trunk, s, cache.trunk, cache.trunk_out);
    double c_out = 0.0;
    dense_forward(p.head_a_raw, cache.trunk_out.data(), cache.a_raw, cache.a_raw_out.data());
    dense_forward(p.head_b, cache.trunk_out.data(), cache.b, cache.heads.b.data());
    dense_forward(p.head_c, cache.trunk_out.data(), cache.c, &c_out);
    for (int d = 0; d < 2; ++d)
        cache.heads.a[d] = -activate(Activation::Softplus, cache.a_raw_out[d]) - p.eps_a;
    cache.heads.c = c_out;
    return cache.heads;
}

double q_from_heads(const QHeads& h, const std::array<double, 2>& a_norm) {
    double q = h.c;
    for (int d = 0; d < 2; ++d) {
        const double diff = h.b[d] - a_norm[d];
        q += h.a[d] * diff * diff;
    }
    return q;
}

double q_value_normalized(const QParams& p, const std::vector<double>& s,
                          const std::array<double, 2>& a_norm) {
    QCache cache;
    return q_from_heads(q_heads(p, s, cache), a_norm);
}

double q_value(const QParams& p, const std::vector<double>& s, const Action& a) {
    return q_value_normalized(p, s, p.bounds.normalize(a));
}

Action best_action(const QParams& p, const std::vector<double>& s) {
    QCache cache;
    const QHeads h = q_heads(p, s, cache);
    std::array<double, 2> n{};
    for (int d = 0; d < 2; ++d) n[d] = std::clamp(h.b[d], -1.0, 1.0);
    return p.bounds.denormalize(n);
}

double max_q(const QParams& p, const std::vector<double>& s) {
    QCache cache;
    const QHeads h = q_heads(p, s, cache);
    std::array<double, 2> n{};
    for (int d = 0; d < 2; ++d) n[d] = std::clamp(h.b[d], -1.0, 1.0);
    return q_from_heads(h, n);
}

Action select_action(const QParams& p, const std::vector<double>& s, double noise_scale,
                     Rng& rng) {
    if (noise_scale < 0) throw ContractError("select_action: negative noise scale");
    Action a = best_action(p, s);
    if (noise_scale > 0) {
        a.accel += rng.gaussian(0.0, noise_scale * p.bounds.half(0));
        a.steer += rng.gaussian(0.0, noise_scale * p.bounds.half(1));
    }
    a.accel = std::clamp(a.accel, p.bounds.lo[0], p.bounds.hi[0]);
    a.steer = std::clamp(a.steer, p.bounds.lo[1], p.bounds.hi[1]);
    return a;
}

double target_value(const QParams& target, double r, const std::vector<double>& s_next,
                    bool terminal, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("target_value: gamma outside [0,1]");
    if (terminal) return r;
    return r + gamma * max_q(target, s_next);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be >= 1");
    buf_.reserve(std::min<std::size_t>(capacity_, 4096));
}

void ReplayMemory::push(Transition t) {
    if (buf_.size() < capacity_) {
        buf_.push_back(std::move(t));
    } else {
        buf_[cursor_] = std::move(t);  // cursor_ always points at the oldest element
    }
    cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayMemory::at(std::size_t logical) const {
    if (logical >= buf_.size()) throw ContractError("replay: index out of range");
    if (buf_.size() < capacity_) return buf_[logical];
    return buf_[(cursor_ + logical) % capacity_];
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t n, Rng& rng) const {
    if (buf_.size() < n)
        throw ContractError("replay: cannot sample " + std::to_string(n) + " from " +
                            std::to_string(buf_.size()) + " stored transitions");
    std::vector<const Transition*> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = &buf_[rng.below(buf_.size())];
    return out;
}

namespace {

// Backward through one head given the gradient at its (post-linear) output,
// accumulating into grads[name/w], grads[name/b] and the trunk gradient.
void head_backward(const DenseLayer& layer, const DenseCache& cache, const double* dy,
                   NamedTensors& grads, const std::string& name, std::vector<double>& dt) {
    Tensor& dw = grads[name + "/w"];
    Tensor& db = grads[name + "/b"];
    if (dw.data.empty()) dw = Tensor::zeros_like(layer.weights);
    if (db.data.empty()) db = Tensor::zeros_like(layer.bias);
    DenseGrads g{std::move(dw), std::move(db)};
    std::vector<double> dx(layer.in_size());
    dense_backward(layer, cache, dy, g, dx.data());
    grads[name + "/w"] = std::move(g.dw);
    grads[name + "/b"] = std::move(g.db);
    for (std::size_t i = 0; i < dx.size(); ++i) dt[i] += dx[i];
}

}  // namespace

double batch_loss(const QParams& theta, const QParams& target,
                  const std::vector<const Transition*>& batch, double gamma,
                  NamedTensors& grads, double* mean_abs_q) {
    if (batch.empty()) throw ContractError("batch_loss: empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    double loss = 0.0;
    double abs_q = 0.0;
    for (const Transition* t : batch) {
        const double q_target = target_value(target, t->r, t->s_next, t->terminal, gamma);

        QCache cache;
        const QHeads h = q_heads(theta, t->s, cache);
        const std::array<double, 2> a_norm = theta.bounds.normalize(t->a);
        const double q_pred = q_from_heads(h, a_norm);
        const double residual = q_target - q_pred;
        loss += inv_n * residual * residual;
        abs_q += inv_n * std::fabs(q_pred);

        // dL/dQ_pred for this sample; chain into the quadratic head.
        const double dq = -2.0 * inv_n * residual;
        std::array<double, 2> d_a_raw{}, d_b{};
        for (int d = 0; d < 2; ++d) {
            const double diff = h.b[d] - a_norm[d];
            d_b[d] = dq * 2.0 * h.a[d] * diff;
            const double da = dq * diff * diff;  // dL/dA_d
            const double sig = 1.0 / (1.0 + std::exp(-cache.a_raw_out[d]));
            d_a_raw[d] = -da * sig;  // A = -softplus(A_raw) - eps_a
        }
        const double d_c = dq;

        std::vector<double> dt(theta.trunk.out_size(), 0.0);
        head_backward(theta.head_a_raw, cache.a_raw, d_a_raw.data(), grads, "head_a", dt);
        head_backward(theta.head_b, cache.b, d_b.data(), grads, "head_b", dt);
        head_backward(theta.head_c, cache.c, &d_c, grads, "head_c", dt);
        mlp_backward(theta.trunk, cache.trunk, dt, grads, "trunk/");
    }
    if (mean_abs_q) *mean_abs_q = abs_q;
    return loss;
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma must lie in [0,1]");
    if (target_sync < 1) throw ConfigError("train.target_sync must be >= 1");
    if (minibatch < 1) throw ConfigError("train.minibatch must be >= 1");
    if (episodes < 1) throw ConfigError("train.episodes must be >= 1");
    if (replay_capacity < static_cast<std::size_t>(minibatch))
        throw ConfigError("train.replay_capacity must hold at least one minibatch");
    if (warmup < 0) throw ConfigError("train.warmup must be >= 0");
    if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
    if (noise_start < 0 || noise_end < 0)
        throw ConfigError("train.noise scales must be nonnegative");
    if (!(anneal_fraction > 0.0) || anneal_fraction > 1.0)
        throw ConfigError("train.anneal_fraction must lie in (0,1]");
    if (total_env_steps < 0) throw ConfigError("train.total_env_steps must be >= 0");
    if (eval_period < 0 || eval_episodes < 1)
        throw ConfigError("train.eval settings out of range");
    if (trunk_width < 1) throw ConfigError("train.trunk_width must be >= 1");
}

std::int64_t TrainConfig::env_step_budget(const EnvConfig& env_cfg) const {
    if (total_env_steps > 0) return total_env_steps;
    return static_cast<std::int64_t>(episodes) * env_cfg.horizon;
}

double noise_scale_at(const TrainConfig& cfg, std::int64_t step, std::int64_t total) {
    const double anneal_steps = cfg.anneal_fraction * static_cast<double>(total);
    if (anneal_steps <= 0.0) return cfg.noise_end;
    const double frac = std::min(1.0, static_cast<double>(step) / anneal_steps);
    return cfg.noise_start + (cfg.noise_end - cfg.noise_start) * frac;
}

bool train_step(QParams& theta, AdamState& adam, const QParams& target, ReplayMemory& replay,
                const TrainConfig& cfg, Rng& rng, std::int64_t& step_counter, double* loss_out,
                double* mean_abs_q_out) {
    const std::size_t need =
        std::max<std::size_t>(static_cast<std::size_t>(cfg.minibatch),
                              static_cast<std::size_t>(cfg.warmup));
    if (replay.size() < need) return false;

    const auto batch = replay.sample(static_cast<std::size_t>(cfg.minibatch), rng);
    NamedTensors grads = theta.zero_grads();
    double mean_abs_q = 0.0;
    const double loss = batch_loss(theta, target, batch, cfg.gamma, grads, &mean_abs_q);
    adam_step(theta.param_refs(), grads, adam);
    ++step_counter;
    if (loss_out) *loss_out = loss;
    if (mean_abs_q_out) *mean_abs_q_out = mean_abs_q;
    return true;
}

void sync_target(QParams& theta, QParams& target, std::int64_t step, int period) {
    if (period < 1) throw ContractError("sync_target: period must be >= 1");
    if (step % period == 0) {
        const NamedTensors values = snapshot(theta.param_refs());
        assign(target.param_refs(), values);
    }
}

EvalMetrics evaluate_policy(const EnvConfig& env_cfg, const PolicyFactory& make_policy,
                            int n_episodes, std::uint64_t seed) {
    if (n_episodes < 1) throw ContractError("evaluate: need at least one episode");
    EvalMetrics m;
    m.episodes = n_episodes;
    std::int64_t steps = 0;
    for (int k = 0; k < n_episodes; ++k) {
        MergeEnv env(env_cfg, sub_seed(seed, static_cast<std::uint64_t>(k)));
        PolicyFn policy = make_policy();
        double ret = 0.0;
        while (!env.terminal()) {
            const Action a = policy(env.observation());
            const StepResult res = env.step(a);
            ret += res.reward;
            m.mean_abs_accel += std::fabs(a.accel);
            m.mean_abs_steer += std::fabs(a.steer);
            ++steps;
            if (res.terminal) {
                switch (res.event) {
                    case TerminalEvent::Merged: m.success_rate += 1.0; break;
                    case TerminalEvent::Collision: m.collision_rate += 1.0; break;
                    case TerminalEvent::OffRoad: m.offroad_rate += 1.0; break;
                    case TerminalEvent::Timeout: m.timeout_rate += 1.0; break;
                    case TerminalEvent::Running: break;
                }
            }
        }
        m.mean_return += ret;
    }
    const double n = static_cast<double>(n_episodes);
    m.success_rate /= n;
    m.collision_rate /= n;
    m.offroad_rate /= n;
    m.timeout_rate /= n;
    m.mean_return /= n;
    if (steps > 0) {
        m.mean_abs_accel /= static_cast<double>(steps);
        m.mean_abs_steer /= static_cast<double>(steps);
    }
    return m;
}

PolicyFactory q_policy(const BeliefParams& belief, const QParams& theta) {
    return [&belief, &theta]() -> PolicyFn {
        auto state = std::make_shared<BeliefState>(belief_init(belief));
        return [&belief, &theta, state](const Observation& obs) -> Action {
            *state = belief_step(belief, *state, obs);
            const Action a = best_action(theta, state->s);
            state->a_prev = a;
            return a;
        };
    };
}

EvalMetrics evaluate(const EnvConfig& env_cfg, const BeliefParams& belief, const QParams& theta,
                     int n_episodes, std::uint64_t seed) {
    return evaluate_policy(env_cfg, q_policy(belief, theta), n_episodes, seed);
}

std::string metrics_csv_header() {
    return "step,episode,loss,mean_abs_q,noise_scale,episode_return,event,"
           "eval_success_rate,eval_collision_rate,eval_timeout_rate,eval_offroad_rate,"
           "eval_mean_return";
}

namespace {

struct MetricsRow {
    std::int64_t step;
    int episode;
    bool trained;
    double loss, mean_abs_q, noise;
    bool is_terminal;
    double episode_return;
    TerminalEvent event;
    const EvalMetrics* eval;  // non-null only on rows carrying a periodic evaluation
};

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
    out << r.step << ',' << r.episode << ',';
    if (r.trained) out << format_double(r.loss) << ',' << format_double(r.mean_abs_q) << ',';
    else out << ",,";
    out << format_double(r.noise) << ',';
    if (r.is_terminal) out << format_double(r.episode_return) << ',' << event_name(r.event);
    else out << ',';
    if (r.eval) {
        out << ',' << format_double(r.eval->success_rate) << ','
            << format_double(r.eval->collision_rate) << ','
            << format_double(r.eval->timeout_rate) << ','
            << format_double(r.eval->offroad_rate) << ','
            << format_double(r.eval->mean_return);
    } else {
        out << ",,,,,";
    }
    out << '\n';
}

}  // namespace

TrainResult run_training(const EnvConfig& env_cfg, const BeliefParams& belief,
                         const TrainConfig& cfg, std::ostream* metrics_out, const LogFn& log) {
    env_cfg.validate();
    cfg.validate();

    const ActionBounds bounds = ActionBounds::from_env(env_cfg);
    TrainResult result;
    result.theta = QParams::init(belief.hidden(), cfg.trunk_width, bounds, cfg.seed);
    QParams target = result.theta;

    AdamConfig adam_cfg;
    adam_cfg.alpha = cfg.learning_rate;
    AdamState adam = AdamState::init(result.theta.param_refs(), adam_cfg);

    ReplayMemory replay(cfg.replay_capacity);
    Rng noise_rng(sub_seed(cfg.seed, 0x4e4f4953));
    Rng sample_rng(sub_seed(cfg.seed, 0x53414d50));
    const std::uint64_t env_seed_base = sub_seed(cfg.seed, 0x454e5653);
    const std::uint64_t eval_seed = sub_seed(cfg.seed, 0x4556414c);

    const std::int64_t budget = cfg.env_step_budget(env_cfg);
    std::int64_t env_steps = 0;
    std::int64_t train_steps = 0;

    if (metrics_out) *metrics_out << metrics_csv_header() << '\n';

    for (int episode = 1; episode <= cfg.episodes; ++episode) {
        MergeEnv env(env_cfg, sub_seed(env_seed_base, static_cast<std::uint64_t>(episode)));
        BeliefState bstate = belief_step(belief, belief_init(belief), env.observation());
        double episode_return = 0.0;
        TerminalEvent event = TerminalEvent::Running;
        int episode_steps = 0;

        while (!env.terminal()) {
            const double noise = noise_scale_at(cfg, env_steps, budget);
            const std::vector<double> s = bstate.s;
            const Action a = select_action(result.theta, s, noise, noise_rng);
            const StepResult res = env.step(a);
            bstate.a_prev = a;
            bstate = belief_step(belief, bstate, res.observation);

            replay.push({s, a, res.reward, bstate.s, res.terminal});
            episode_return += res.reward;
            ++env_steps;
            ++episode_steps;

            double loss = 0.0, mean_abs_q = 0.0;
            const bool trained = train_step(result.theta, adam, target, replay, cfg, sample_rng,
                                            train_steps, &loss, &mean_abs_q);
            if (trained) sync_target(result.theta, target, train_steps, cfg.target_sync);

            if (res.terminal) event = res.event;
            if (metrics_out) {
                MetricsRow row{env_steps, episode, trained, loss, mean_abs_q, noise,
                               res.terminal, episode_return, res.event, nullptr};
                EvalMetrics periodic;
                if (res.terminal && cfg.eval_period > 0 && episode % cfg.eval_period == 0) {
                    periodic = evaluate(env_cfg, belief, result.theta, cfg.eval_episodes,
                                        eval_seed);
                    row.eval = &periodic;
                }
                write_metrics_row(*metrics_out, row);
            }
        }

        result.episodes.push_back({episode, episode_steps, episode_return, event});
        if (log && (episode % 100 == 0 || episode == cfg.episodes)) {
            double recent = 0.0;
            int recent_n = 0;
            for (std::size_t i = result.episodes.size(); i-- > 0 && recent_n < 100; ++recent_n)
                recent += result.episodes[i].episode_return;
            log("episode " + std::to_string(episode) + "/" + std::to_string(cfg.episodes) +
                " env_steps=" + std::to_string(env_steps) +
                " noise=" + std::to_string(noise_scale_at(cfg, env_steps, budget)) +
                " mean_return_100=" + std::to_string(recent / std::max(1, recent_n)));
        }
    }

    result.env_steps = env_steps;
    result.train_steps = train_steps;
    result.final_eval = evaluate(env_cfg, belief, result.theta, cfg.eval_episodes, eval_seed);
    return result;
}

Checkpoint q_to_checkpoint(const QParams& p) {
    Checkpoint ck;
    QParams& mut = const_cast<QParams&>(p);
    for (const auto& r : mut.param_refs()) ck.tensors[r.name] = *r.tensor;
    ck.metadata["type"] = "q";
    ck.metadata["eps_a"] = format_double(p.eps_a);
    nlohmann::json bounds;
    bounds["accel"] = {p.bounds.lo[0], p.bounds.hi[0]};
    bounds["steer"] = {p.bounds.lo[1], p.bounds.hi[1]};
    ck.metadata["bounds"] = bounds.dump();
    return ck;
}

QParams q_from_checkpoint(const Checkpoint& ck) {
    if (ck.metadata.count("type") && ck.metadata.at("type") != "q")
        throw ParseError("checkpoint is not a q-network (type=" + ck.metadata.at("type") + ")");
    auto t0 = ck.tensors.find("trunk/layer0/w");
    auto t1 = ck.tensors.find("trunk/layer1/w");
    if (t0 == ck.tensors.end() || t1 == ck.tensors.end() || t0->second.shape.size() != 2)
        throw ParseError("q checkpoint: missing trunk tensors");
    const std::size_t state_size = t0->second.cols();
    const std::size_t width = t1->second.rows();

    QParams p;
    p.trunk = Mlp({state_size, t0->second.rows(), width}, {Activation::Tanh, Activation::Tanh});
    p.head_a_raw = DenseLayer(2, width, Activation::Linear);
    p.head_b = DenseLayer(2, width, Activation::Linear);
    p.head_c = DenseLayer(1, width, Activation::Linear);
    for (const auto& r : p.param_refs()) {
        auto it = ck.tensors.find(r.name);
        if (it == ck.tensors.end()) throw ParseError("q checkpoint: missing tensor " + r.name);
        if (!it->second.same_shape(*r.tensor))
            throw ParseError("q checkpoint: shape mismatch for " + r.name);
        *r.tensor = it->second;
    }

    try {
        if (ck.metadata.count("eps_a")) p.eps_a = std::stod(ck.metadata.at("eps_a"));
        if (ck.metadata.count("bounds")) {
            const auto bounds = nlohmann::json::parse(ck.metadata.at("bounds"));
            p.bounds.lo[0] = bounds.at("accel").at(0).get<double>();
            p.bounds.hi[0] = bounds.at("accel").at(1).get<double>();
            p.bounds.lo[1] = bounds.at("steer").at(0).get<double>();
            p.bounds.hi[1] = bounds.at("steer").at(1).get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("q checkpoint: bad metadata: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ParseError("q checkpoint: bad eps_a metadata");
    }
    p.validate();
    return p;
}

}  // namespace mergerl
