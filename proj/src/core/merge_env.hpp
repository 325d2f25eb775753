#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace mergerl {

enum class BehaviorMode { Cooperative, Adversarial, Neutral };
enum class TerminalEvent { Running, Merged, Collision, OffRoad, Timeout };

const char* behavior_mode_name(BehaviorMode m);
BehaviorMode behavior_mode_from_name(const std::string& name);
const char* event_name(TerminalEvent e);
TerminalEvent event_from_name(const std::string& name);

struct RewardWeights {
    double accel_smooth = -0.05;    // per (m/s^2)^2
    double steer_smooth = -5.0;     // per rad^2
    double safeness = -10.0;
    double timeliness = -1.0;
    double d_safe = 10.0;           // m
    double bonus_merged = 10.0;
    double bonus_collision = -100.0;
    double bonus_off_road = -20.0;
    double bonus_timeout = -20.0;

    void validate() const;
};

// Initial-condition sampling ranges used by reset.
struct InitRanges {
    double station_min = -30.0, station_max = -10.0;  // merging vehicle p^m (m)
    double speed_min = 15.0, speed_max = 20.0;        // merging vehicle v^m (m/s)
    double gap_min = 25.0, gap_max = 45.0;            // p^f - p^l (m)
    double main_speed_min = 20.0, main_speed_max = 27.0;
    double gap_frac_min = 0.25, gap_frac_max = 0.75;  // merging station inside the gap
};

struct EnvConfig {
    double dt = 0.1;                 // s
    double lane_width = 3.7;         // m; mainline center at y=0, ramp center at y=-w
    double accel_lane_length = 200.0;
    double merge_point_station = 0.0;
    double wheelbase = 2.8;
    double vehicle_length = 4.5;
    double vehicle_width = 1.8;
    double accel_min = -4.5, accel_max = 3.0;     // m/s^2
    double steer_min = -0.262, steer_max = 0.262; // rad
    double v_max = 35.0;
    double v_free = 25.0;
    BehaviorMode behavior = BehaviorMode::Cooperative;
    int horizon = 300;
    RewardWeights reward;
    InitRanges init;

    void validate() const;
};

// Merging vehicle pose plus the two mainline vehicles. Longitudinal station p
// is relative to the start of the parallel acceleration lane; lateral y is 0
// at the mainline lane center.
struct WorldState {
    double merge_station = 0.0;
    double merge_lateral = 0.0;
    double merge_heading = 0.0;
    double merge_speed = 0.0;
    double lag_station = 0.0;
    double lag_speed = 0.0;
    double front_station = 0.0;
    double front_speed = 0.0;
    int step = 0;
};

// The 9-variable observation, fixed order (v^m, p^m, phi^m, l^m, r^m, v^f, p^f, v^l, p^l).
struct Observation {
    double v_m = 0.0;
    double p_m = 0.0;
    double phi_m = 0.0;
    double l_m = 0.0;  // distance to the left marking of the current lane
    double r_m = 0.0;  // distance to the right marking
    double v_f = 0.0;
    double p_f = 0.0;
    double v_l = 0.0;
    double p_l = 0.0;

    std::array<double, 9> as_array() const { return {v_m, p_m, phi_m, l_m, r_m, v_f, p_f, v_l, p_l}; }
    static Observation from_array(const std::array<double, 9>& a);
};

struct Action {
    double accel = 0.0;  // m/s^2
    double steer = 0.0;  // rad
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool terminal = false;
    TerminalEvent event = TerminalEvent::Running;
};

Action clamp_action(const Action& a, const EnvConfig& cfg);

// Minimum bumper-to-bumper longitudinal gap to the lag/front vehicle while the
// merging vehicle laterally overlaps the mainline vehicles' bodies; d_safe
// otherwise. May be negative (longitudinal overlap).
double min_gap(const WorldState& s, const EnvConfig& cfg);

// Termination in priority order collision > off_road > merged > timeout.
TerminalEvent termination(const WorldState& s, const EnvConfig& cfg);

Observation observe(const WorldState& s, const EnvConfig& cfg);

// Per-step reward, always <= 0: weighted squared accel/steer penalties, a
// proximity penalty below d_safe, and a below-free-flow speed penalty.
// Terminal bonuses are added by the env on top of this.
double compute_reward(const WorldState& s, const Action& clamped, const EnvConfig& cfg);

// Deterministic, seeded episode. Single-owner handle; stepping after the
// terminal event is a contract error.
class MergeEnv {
public:
    MergeEnv(const EnvConfig& cfg, std::uint64_t seed);

    StepResult step(const Action& action);

    const Observation& observation() const { return obs_; }
    const WorldState& state() const { return state_; }
    const EnvConfig& config() const { return cfg_; }
    bool terminal() const { return event_ != TerminalEvent::Running; }
    TerminalEvent event() const { return event_; }
    int steps() const { return state_.step; }

private:
    EnvConfig cfg_;
    WorldState state_;
    Observation obs_;
    TerminalEvent event_ = TerminalEvent::Running;
};

}  // namespace mergerl
