#include "core/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "core/adam.hpp"
#include "core/errors.hpp"
#include "core/rng.hpp"

namespace mergerl {

void BeliefHyper::validate() const {
    if (hidden < 1 || obs_head_width < 1) throw ConfigError("belief: widths must be >= 1");
    if (epochs < 1) throw ConfigError("belief.epochs must be >= 1");
    if (truncation < 1) throw ConfigError("belief.truncation must be >= 1");
    if (batch_windows < 1) throw ConfigError("belief.batch_windows must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("belief.learning_rate must be positive");
    if (!(holdout_frac > 0.0) || !(holdout_frac < 1.0))
        throw ConfigError("belief.holdout_frac must be in (0, 1)");
    if (dataset_episodes < 1) throw ConfigError("belief.dataset_episodes must be >= 1");
}

BeliefParams BeliefParams::init(const BeliefHyper& hyper, std::uint64_t seed) {
    hyper.validate();
    BeliefParams p;
    p.lstm = LstmCellParams(kBeliefInputSize, hyper.hidden);
    p.obs_head = Mlp({hyper.hidden + 2, hyper.obs_head_width, 9},
                     {Activation::Tanh, Activation::Linear});
    Rng rng(sub_seed(seed, 0x6265));
    p.lstm.init_xavier(rng);
    p.obs_head.init_xavier(rng);
    return p;
}

ParamRefs BeliefParams::param_refs() {
    ParamRefs refs = lstm.param_refs("lstm/");
    for (auto& r : obs_head.param_refs("obs_head/")) refs.push_back(r);
    return refs;
}

NamedTensors BeliefParams::zero_grads() const {
    NamedTensors grads = lstm.zero_grads("lstm/");
    NamedTensors head = obs_head.zero_grads("obs_head/");
    grads.insert(head.begin(), head.end());
    return grads;
}

BeliefState belief_init(const BeliefParams& params) {
    BeliefState st;
    st.s.assign(params.hidden(), 0.0);
    st.c.assign(params.hidden(), 0.0);
    st.a_prev = {0.0, 0.0};
    return st;
}

namespace {

std::vector<double> belief_input(const BeliefParams& params, const Observation& obs,
                                 const Action& a_prev) {
    const auto z = params.norm.normalize_obs(obs);
    const auto za = params.norm.normalize_action(a_prev);
    std::vector<double> x(kBeliefInputSize);
    std::copy(z.begin(), z.end(), x.begin());
    x[9] = za[0];
    x[10] = za[1];
    return x;
}

std::vector<double> head_input(const BeliefParams& params, const std::vector<double>& h,
                               const Action& action) {
    const auto za = params.norm.normalize_action(action);
    std::vector<double> u(h.size() + 2);
    std::copy(h.begin(), h.end(), u.begin());
    u[h.size()] = za[0];
    u[h.size() + 1] = za[1];
    return u;
}

}  // namespace

BeliefState belief_step(const BeliefParams& params, const BeliefState& state,
                        const Observation& o_t) {
    const std::vector<double> x = belief_input(params, o_t, state.a_prev);
    BeliefState next;
    LstmCache cache;
    lstm_forward(params.lstm, x, state.s, state.c, cache, next.s, next.c);
    next.a_prev = state.a_prev;
    return next;
}

Observation predict_observation(const BeliefParams& params, const BeliefState& state,
                                const Action& a_prev) {
    const std::vector<double> u = head_input(params, state.s, a_prev);
    MlpCache cache;
    std::vector<double> z;
    mlp_forward(params.obs_head, u, cache, z);
    std::array<double, 9> za{};
    std::copy(z.begin(), z.end(), za.begin());
    return params.norm.denormalize_obs(za);
}

BeliefWindowResult belief_window(const BeliefParams& params, const Episode& ep, std::size_t t0,
                                 std::size_t t1, std::vector<double>& h, std::vector<double>& c,
                                 NamedTensors* grads) {
    const std::size_t H = params.hidden();
    t1 = std::min(t1, ep.size());
    if (t0 >= t1) return {};

    struct StepRecord {
        LstmCache lstm;
        MlpCache head;
        std::vector<double> residual;  // empty when no prediction at this step
    };
    std::vector<StepRecord> records(t1 - t0);

    BeliefWindowResult result;
    for (std::size_t i = t0; i < t1; ++i) {
        StepRecord& rec = records[i - t0];
        const Action a_prev = (i == 0) ? Action{0.0, 0.0} : ep.actions[i - 1];
        const std::vector<double> x = belief_input(params, ep.observations[i], a_prev);
        std::vector<double> h_next, c_next;
        lstm_forward(params.lstm, x, h, c, rec.lstm, h_next, c_next);
        h = std::move(h_next);
        c = std::move(c_next);

        if (i + 1 < ep.size()) {
            const std::vector<double> u = head_input(params, h, ep.actions[i]);
            std::vector<double> z_hat;
            mlp_forward(params.obs_head, u, rec.head, z_hat);
            const auto target = params.norm.normalize_obs(ep.observations[i + 1]);
            rec.residual.resize(9);
            for (std::size_t k = 0; k < 9; ++k) {
                rec.residual[k] = z_hat[k] - target[k];
                result.loss += rec.residual[k] * rec.residual[k];
            }
            result.predictions += 1;
        }
    }

    if (grads) {
        std::vector<double> dh(H, 0.0), dc(H, 0.0);
        for (std::size_t i = t1; i-- > t0;) {
            StepRecord& rec = records[i - t0];
            if (!rec.residual.empty()) {
                std::vector<double> dy(9);
                for (std::size_t k = 0; k < 9; ++k) dy[k] = 2.0 * rec.residual[k];
                const std::vector<double> du =
                    mlp_backward(params.obs_head, rec.head, dy, *grads, "obs_head/");
                for (std::size_t k = 0; k < H; ++k) dh[k] += du[k];
            }
            LstmGrads lg;
            lg.params.swap(*grads);
            lstm_backward(params.lstm, rec.lstm, dh, dc, lg, "lstm/");
            grads->swap(lg.params);
            dh = std::move(lg.dh_prev);
            dc = std::move(lg.dc_prev);
        }
    }
    return result;
}

BeliefEval eval_belief(const BeliefParams& params, const TrajectoryDataset& ds,
                       const std::vector<std::size_t>& episode_indices) {
    BeliefEval eval;
    const std::size_t H = params.hidden();
    for (std::size_t e : episode_indices) {
        const Episode& ep = ds.episodes.at(e);
        std::vector<double> h(H, 0.0), c(H, 0.0);
        LstmCache cache;
        MlpCache head_cache;
        for (std::size_t i = 0; i < ep.size(); ++i) {
            const Action a_prev = (i == 0) ? Action{0.0, 0.0} : ep.actions[i - 1];
            const std::vector<double> x = belief_input(params, ep.observations[i], a_prev);
            std::vector<double> h_next, c_next;
            lstm_forward(params.lstm, x, h, c, cache, h_next, c_next);
            h = std::move(h_next);
            c = std::move(c_next);
            if (i + 1 >= ep.size()) break;

            const std::vector<double> u = head_input(params, h, ep.actions[i]);
            std::vector<double> z_hat;
            mlp_forward(params.obs_head, u, head_cache, z_hat);
            const auto target = params.norm.normalize_obs(ep.observations[i + 1]);
            const auto prev = params.norm.normalize_obs(ep.observations[i]);
            for (std::size_t k = 0; k < 9; ++k) {
                const double rm = z_hat[k] - target[k];
                const double rp = prev[k] - target[k];
                eval.model_per_feature[k] += rm * rm;
                eval.persistence_per_feature[k] += rp * rp;
            }
            eval.predictions += 1;
        }
    }
    if (eval.predictions > 0) {
        const double n = static_cast<double>(eval.predictions);
        for (std::size_t k = 0; k < 9; ++k) {
            eval.model_per_feature[k] /= n;
            eval.persistence_per_feature[k] /= n;
            eval.model_mse += eval.model_per_feature[k] / 9.0;
            eval.persistence_mse += eval.persistence_per_feature[k] / 9.0;
        }
    }
    return eval;
}

BeliefParams train_belief(const TrajectoryDataset& ds, const BeliefHyper& hyper,
                          std::uint64_t seed, BeliefTrainReport* report, const LogFn& log) {
    hyper.validate();
    if (ds.episodes.size() < 2)
        throw ContractError("train_belief: need at least 2 episodes, got " +
                            std::to_string(ds.episodes.size()));

    // 90/10 split by episode, seeded shuffle.
    std::vector<std::size_t> order(ds.episodes.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(sub_seed(seed, 0x53504c49));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[split_rng.below(i)]);
    std::size_t holdout_count = static_cast<std::size_t>(
        std::max(1.0, std::floor(hyper.holdout_frac * static_cast<double>(order.size()) + 0.5)));
    if (holdout_count >= order.size()) holdout_count = order.size() - 1;
    std::vector<std::size_t> holdout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout_count));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(holdout_count), order.end());

    BeliefParams params = BeliefParams::init(hyper, seed);
    params.norm = NormStats::from_episodes(ds, train);

    const ParamRefs refs = params.param_refs();
    AdamConfig adam_cfg;
    adam_cfg.alpha = hyper.learning_rate;
    AdamState adam = AdamState::init(refs, adam_cfg);

    const std::size_t K = static_cast<std::size_t>(hyper.truncation);
    if (report) {
        report->train_episodes = train;
        report->holdout_episodes = holdout;
    }

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng epoch_rng(sub_seed(seed, 0x45504f43 + static_cast<std::uint64_t>(epoch)));
        std::vector<std::size_t> epoch_order = train;
        for (std::size_t i = epoch_order.size(); i > 1; --i)
            std::swap(epoch_order[i - 1], epoch_order[epoch_rng.below(i)]);

        NamedTensors grads = params.zero_grads();
        std::size_t batch_windows = 0;
        std::size_t batch_predictions = 0;
        double epoch_loss = 0.0;
        std::size_t epoch_predictions = 0;

        auto flush = [&]() {
            if (batch_predictions == 0) return;
            const double scale = 1.0 / static_cast<double>(batch_predictions);
            for (auto& [name, g] : grads)
                for (double& v : g.data) v *= scale;
            adam_step(refs, grads, adam);
            grads = params.zero_grads();
            batch_windows = 0;
            batch_predictions = 0;
        };

        for (std::size_t e : epoch_order) {
            const Episode& ep = ds.episodes[e];
            std::vector<double> h(params.hidden(), 0.0), c(params.hidden(), 0.0);
            for (std::size_t t0 = 0; t0 < ep.size(); t0 += K) {
                const auto res = belief_window(params, ep, t0, t0 + K, h, c, &grads);
                epoch_loss += res.loss;
                epoch_predictions += res.predictions;
                batch_predictions += res.predictions;
                if (++batch_windows >= static_cast<std::size_t>(hyper.batch_windows)) flush();
            }
        }
        flush();

        const double train_mse =
            epoch_predictions ? epoch_loss / (9.0 * static_cast<double>(epoch_predictions)) : 0.0;
        const BeliefEval hold = eval_belief(params, ds, holdout);
        if (report) {
            report->train_loss.push_back(train_mse);
            report->holdout_loss.push_back(hold.model_mse);
        }
        if (log)
            log("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(hyper.epochs) +
                " train_mse=" + std::to_string(train_mse) +
                " holdout_mse=" + std::to_string(hold.model_mse));
    }

    if (report) report->final_eval = eval_belief(params, ds, holdout);
    return params;
}

Checkpoint belief_to_checkpoint(const BeliefParams& params) {
    Checkpoint ck;
    BeliefParams& p = const_cast<BeliefParams&>(params);
    for (const auto& r : p.param_refs()) ck.tensors[r.name] = *r.tensor;
    ck.metadata["type"] = "belief";
    ck.metadata["hidden"] = std::to_string(params.lstm.hidden_size);
    ck.metadata["input"] = std::to_string(params.lstm.input_size);
    nlohmann::json norm;
    norm["obs_mean"] = params.norm.obs_mean;
    norm["obs_std"] = params.norm.obs_std;
    norm["act_mean"] = params.norm.act_mean;
    norm["act_std"] = params.norm.act_std;
    ck.metadata["norm"] = norm.dump();
    return ck;
}

BeliefParams belief_from_checkpoint(const Checkpoint& ck) {
    auto meta = ck.metadata;
    if (meta.count("type") && meta.at("type") != "belief")
        throw ParseError("checkpoint is not a belief model (type=" + meta.at("type") + ")");
    auto it = ck.tensors.find("lstm/b_i");
    if (it == ck.tensors.end()) throw ParseError("belief checkpoint: missing lstm tensors");
    const std::size_t hidden = it->second.size();
    auto wi = ck.tensors.find("lstm/w_i");
    if (wi == ck.tensors.end() || wi->second.shape.size() != 2)
        throw ParseError("belief checkpoint: missing lstm/w_i");
    const std::size_t input = wi->second.cols() - hidden;

    auto head_w0 = ck.tensors.find("obs_head/layer0/w");
    if (head_w0 == ck.tensors.end()) throw ParseError("belief checkpoint: missing obs_head tensors");
    const std::size_t width = head_w0->second.rows();

    BeliefHyper hyper;
    hyper.hidden = hidden;
    hyper.obs_head_width = width;
    BeliefParams p;
    p.lstm = LstmCellParams(input, hidden);
    p.obs_head = Mlp({hidden + 2, width, 9}, {Activation::Tanh, Activation::Linear});
    for (const auto& r : p.param_refs()) {
        auto t = ck.tensors.find(r.name);
        if (t == ck.tensors.end()) throw ParseError("belief checkpoint: missing tensor " + r.name);
        if (!t->second.same_shape(*r.tensor))
            throw ParseError("belief checkpoint: shape mismatch for " + r.name);
        *r.tensor = t->second;
    }
    p.lstm.validate();
    p.obs_head.validate();

    if (!meta.count("norm")) throw ParseError("belief checkpoint: missing norm metadata");
    try {
        const auto norm = nlohmann::json::parse(meta.at("norm"));
        p.norm.obs_mean = norm.at("obs_mean").get<std::array<double, 9>>();
        p.norm.obs_std = norm.at("obs_std").get<std::array<double, 9>>();
        p.norm.act_mean = norm.at("act_mean").get<std::array<double, 2>>();
        p.norm.act_std = norm.at("act_std").get<std::array<double, 2>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("belief checkpoint: bad norm metadata: ") + e.what());
    }
    return p;
}

}  // namespace mergerl
