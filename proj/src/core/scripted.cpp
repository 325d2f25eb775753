#include "core/scripted.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"

namespace mergerl {

using nlohmann::json;

namespace {

// Gap-acceptance lookahead, roughly how long the crossing itself takes.
constexpr double kEngageLookahead = 1.0;     // s

}  // namespace

void ScriptedPolicyParams::validate() const {
    if (!(gap_min > 0) || !(speed_gain > 0) || !(lateral_gain > 0) || !(heading_gain > 0) ||
        !(engage_margin > 0))
        throw ConfigError("scripted policy gains must be positive");
}

Action scripted_policy(const Observation& obs, const ScriptedPolicyParams& params,
                       ScriptedPolicyState& state, const EnvConfig& cfg) {
    const double w = cfg.lane_width;

    // l_m alone does not say which lane the vehicle is in; both candidates are
    // tried and the one continuous with the previous estimate wins. Heading is
    // bounded so per-step lateral travel stays under w/2 and the nearer
    // candidate is always the true one. Episodes start at the ramp-lane center.
    const double y_ramp = obs.l_m - 1.5 * w;
    const double y_main = obs.l_m - 0.5 * w;
    double y;
    if (!state.has_lateral) {
        y = y_ramp;
        state.has_lateral = true;
    } else {
        y = (std::fabs(y_ramp - state.lateral_estimate) <= std::fabs(y_main - state.lateral_estimate))
                ? y_ramp
                : y_main;
    }
    state.lateral_estimate = y;

    // Gap acceptance: enough bumper space between the gap vehicles, and the
    // merging vehicle clear of both by the engage margin. Margins are checked
    // at constant speeds one lane-change duration ahead, so a fast lag vehicle
    // that would eat the rear clearance mid-crossing rejects the gap instead
    // of rear-ending us.
    if (!state.engaged) {
        const double available = (obs.p_f - obs.p_l) - cfg.vehicle_length;
        const double rear = (obs.p_m + kEngageLookahead * obs.v_m) -
                            (obs.p_l + kEngageLookahead * obs.v_l);
        const double ahead = (obs.p_f + kEngageLookahead * obs.v_f) -
                             (obs.p_m + kEngageLookahead * obs.v_m);
        if (available >= params.gap_min && rear >= params.engage_margin &&
            ahead >= params.engage_margin)
            state.engaged = true;
    }

    const double v_target = 0.5 * (obs.v_l + obs.v_f);
    Action a;
    a.accel = params.speed_gain * (v_target - obs.v_m);
    const double offset = state.engaged ? y : (y + w);
    a.steer = -params.lateral_gain * offset - params.heading_gain * obs.phi_m;
    return clamp_action(a, cfg);
}

std::size_t TrajectoryDataset::total_steps() const {
    std::size_t n = 0;
    for (const auto& ep : episodes) n += ep.size();
    return n;
}

bool operator==(const Episode& a, const Episode& b) {
    if (a.event != b.event || a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.observations[i].as_array() != b.observations[i].as_array()) return false;
        if (a.actions[i].accel != b.actions[i].accel || a.actions[i].steer != b.actions[i].steer)
            return false;
    }
    return true;
}

bool operator==(const TrajectoryDataset& a, const TrajectoryDataset& b) {
    return a.episodes == b.episodes;
}

namespace {

Episode run_scripted_episode(const EnvConfig& cfg, const ScriptedPolicyParams& params,
                             std::uint64_t seed) {
    MergeEnv env(cfg, seed);
    ScriptedPolicyState state;
    Episode ep;
    while (!env.terminal()) {
        const Observation obs = env.observation();
        const Action a = scripted_policy(obs, params, state, cfg);
        const StepResult res = env.step(a);
        ep.observations.push_back(obs);
        ep.actions.push_back(a);
        if (res.terminal) ep.event = res.event;
    }
    return ep;
}

}  // namespace

TrajectoryDataset generate_dataset(const EnvConfig& cfg, const ScriptedPolicyParams& params,
                                   int n_episodes, std::uint64_t seed) {
    if (n_episodes < 1) throw ContractError("generate_dataset: n_episodes must be >= 1");
    params.validate();
    static constexpr BehaviorMode kModes[3] = {BehaviorMode::Cooperative, BehaviorMode::Neutral,
                                               BehaviorMode::Adversarial};
    TrajectoryDataset ds;
    for (int i = 0; i < n_episodes; ++i) {
        EnvConfig episode_cfg = cfg;
        episode_cfg.behavior = kModes[i % 3];
        ds.episodes.push_back(run_scripted_episode(episode_cfg, params, seed + static_cast<std::uint64_t>(i)));
    }
    return ds;
}

TrajectoryDataset generate_dataset_mode(const EnvConfig& cfg, const ScriptedPolicyParams& params,
                                        int n_episodes, std::uint64_t seed, BehaviorMode mode) {
    if (n_episodes < 1) throw ContractError("generate_dataset: n_episodes must be >= 1");
    params.validate();
    TrajectoryDataset ds;
    EnvConfig episode_cfg = cfg;
    episode_cfg.behavior = mode;
    for (int i = 0; i < n_episodes; ++i)
        ds.episodes.push_back(run_scripted_episode(episode_cfg, params, seed + static_cast<std::uint64_t>(i)));
    return ds;
}

std::string dataset_to_jsonl(const TrajectoryDataset& ds) {
    std::ostringstream out;
    for (const auto& ep : ds.episodes) {
        json steps = json::array();
        for (std::size_t i = 0; i < ep.size(); ++i) {
            json row = json::array();
            for (double v : ep.observations[i].as_array()) row.push_back(v);
            row.push_back(ep.actions[i].accel);
            row.push_back(ep.actions[i].steer);
            steps.push_back(std::move(row));
        }
        json line;
        line["event"] = event_name(ep.event);
        line["steps"] = std::move(steps);
        out << line.dump() << '\n';
    }
    return out.str();
}

TrajectoryDataset dataset_from_jsonl(const std::string& text) {
    TrajectoryDataset ds;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json parsed;
        try {
            parsed = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("dataset: line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            Episode ep;
            ep.event = event_from_name(parsed.at("event").get<std::string>());
            for (const auto& row : parsed.at("steps")) {
                if (!row.is_array() || row.size() != 11)
                    throw ParseError("dataset: line " + std::to_string(line_no) +
                                     ": step rows must have 11 numbers");
                std::array<double, 9> o{};
                for (std::size_t k = 0; k < 9; ++k) o[k] = row[k].get<double>();
                ep.observations.push_back(Observation::from_array(o));
                ep.actions.push_back({row[9].get<double>(), row[10].get<double>()});
            }
            ds.episodes.push_back(std::move(ep));
        } catch (const json::exception& e) {
            throw ParseError("dataset: line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ds;
}

void dataset_write(const TrajectoryDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("dataset: cannot open " + path + " for writing");
    out << dataset_to_jsonl(ds);
    if (!out) throw IoError("dataset: write failed for " + path);
}

TrajectoryDataset dataset_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("dataset: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return dataset_from_jsonl(buf.str());
}

}  // namespace mergerl
