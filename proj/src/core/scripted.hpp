#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/merge_env.hpp"

namespace mergerl {

// Gap-acceptance plus proportional lateral tracking. Generates the supervised
// training corpus for the belief model.
struct ScriptedPolicyParams {
    double gap_min = 15.0;       // m of front-to-lag bumper gap needed to engage
    double speed_gain = 1.0;     // 1/s
    double lateral_gain = 0.05;  // rad/m
    double heading_gain = 0.6;
    double engage_margin = 6.0;  // m of projected clearance to both gap vehicles

    void validate() const;
};

// Engagement latches once triggered; keep one state per episode. The lateral
// estimate carries across steps so the controller can tell the ramp lane from
// the mainline lane, which share the l_m/r_m encoding.
struct ScriptedPolicyState {
    bool engaged = false;
    bool has_lateral = false;
    double lateral_estimate = 0.0;
};

Action scripted_policy(const Observation& obs, const ScriptedPolicyParams& params,
                       ScriptedPolicyState& state, const EnvConfig& cfg);

struct Episode {
    std::vector<Observation> observations;  // o_t at which each action was taken
    std::vector<Action> actions;            // a_t executed at o_t
    TerminalEvent event = TerminalEvent::Running;

    std::size_t size() const { return observations.size(); }
};

struct TrajectoryDataset {
    std::vector<Episode> episodes;

    std::size_t total_steps() const;
};

bool operator==(const Episode& a, const Episode& b);
bool operator==(const TrajectoryDataset& a, const TrajectoryDataset& b);

// Runs the scripted controller for n_episodes episodes with env seeds
// seed..seed+n-1, cycling behavior modes cooperative, neutral, adversarial.
TrajectoryDataset generate_dataset(const EnvConfig& cfg, const ScriptedPolicyParams& params,
                                   int n_episodes, std::uint64_t seed);

// Single-mode variant (used for measurements and tests).
TrajectoryDataset generate_dataset_mode(const EnvConfig& cfg, const ScriptedPolicyParams& params,
                                        int n_episodes, std::uint64_t seed, BehaviorMode mode);

// JSON Lines, one episode per line:
//   {"event": "...", "steps": [[o0..o8, accel, steer], ...]}
std::string dataset_to_jsonl(const TrajectoryDataset& ds);
TrajectoryDataset dataset_from_jsonl(const std::string& text);
void dataset_write(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset dataset_read(const std::string& path);

}  // namespace mergerl
