#include "core/merge_env.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace mergerl {

const char* behavior_mode_name(BehaviorMode m) {
    switch (m) {
        case BehaviorMode::Cooperative: return "cooperative";
        case BehaviorMode::Adversarial: return "adversarial";
        case BehaviorMode::Neutral: return "neutral";
    }
    return "neutral";
}

BehaviorMode behavior_mode_from_name(const std::string& name) {
    if (name == "cooperative") return BehaviorMode::Cooperative;
    if (name == "adversarial") return BehaviorMode::Adversarial;
    if (name == "neutral") return BehaviorMode::Neutral;
    throw ConfigError("unknown behavior mode: " + name);
}

const char* event_name(TerminalEvent e) {
    switch (e) {
        case TerminalEvent::Running: return "running";
        case TerminalEvent::Merged: return "merged";
        case TerminalEvent::Collision: return "collision";
        case TerminalEvent::OffRoad: return "off_road";
        case TerminalEvent::Timeout: return "timeout";
    }
    return "running";
}

TerminalEvent event_from_name(const std::string& name) {
    if (name == "running") return TerminalEvent::Running;
    if (name == "merged") return TerminalEvent::Merged;
    if (name == "collision") return TerminalEvent::Collision;
    if (name == "off_road") return TerminalEvent::OffRoad;
    if (name == "timeout") return TerminalEvent::Timeout;
    throw ParseError("unknown terminal event: " + name);
}

void RewardWeights::validate() const {
    if (accel_smooth > 0 || steer_smooth > 0 || safeness > 0 || timeliness > 0)
        throw ConfigError("reward weights r1..r4 must be <= 0");
    if (!(d_safe > 0)) throw ConfigError("d_safe must be positive");
}

void EnvConfig::validate() const {
    if (!(dt > 0)) throw ConfigError("env.dt must be positive");
    if (!(lane_width > 0) || !(accel_lane_length > 0) || !(wheelbase > 0) ||
        !(vehicle_length > 0) || !(vehicle_width > 0))
        throw ConfigError("env geometry lengths must be positive");
    if (!(accel_min < accel_max) || !(steer_min < steer_max))
        throw ConfigError("env action bounds must be ordered");
    if (!(v_max > 0) || !(v_free > 0)) throw ConfigError("env speeds must be positive");
    if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
    reward.validate();
}

Observation Observation::from_array(const std::array<double, 9>& a) {
    Observation o;
    o.v_m = a[0]; o.p_m = a[1]; o.phi_m = a[2]; o.l_m = a[3]; o.r_m = a[4];
    o.v_f = a[5]; o.p_f = a[6]; o.v_l = a[7]; o.p_l = a[8];
    return o;
}

Action clamp_action(const Action& a, const EnvConfig& cfg) {
    return {std::clamp(a.accel, cfg.accel_min, cfg.accel_max),
            std::clamp(a.steer, cfg.steer_min, cfg.steer_max)};
}

namespace {

// Lateral body overlap between the merging vehicle and a mainline vehicle
// (both lane-centered, same width). Gates min_gap so that min_gap < 0
// coincides exactly with axis-aligned rectangle overlap.
bool lateral_body_overlap(const WorldState& s, const EnvConfig& cfg) {
    return std::fabs(s.merge_lateral) < cfg.vehicle_width;
}

// Overlap between the merging vehicle's body and the mainline lane itself.
// Gates the proximity penalty (and cooperative braking), which should ramp up
// as soon as any part of the body pokes into the lane, well before the bodies
// can touch.
bool lateral_lane_overlap(const WorldState& s, const EnvConfig& cfg) {
    return std::fabs(s.merge_lateral) < 0.5 * (cfg.lane_width + cfg.vehicle_width);
}

// Bumper-to-bumper distances are order-free: a vehicle 20 m behind is just as
// clear as one 20 m ahead, and overlap (gap < 0) means |station diff| within
// one vehicle length either way.
double front_gap(const WorldState& s, const EnvConfig& cfg) {
    return std::fabs(s.front_station - s.merge_station) - cfg.vehicle_length;
}

double lag_gap(const WorldState& s, const EnvConfig& cfg) {
    return std::fabs(s.merge_station - s.lag_station) - cfg.vehicle_length;
}

// Gap used by the proximity penalty and by cooperative braking: active from
// the moment the body enters the lane, unlike min_gap which waits for lateral
// body overlap.
double reward_gap(const WorldState& s, const EnvConfig& cfg) {
    if (!lateral_lane_overlap(s, cfg)) return cfg.reward.d_safe;
    return std::min(front_gap(s, cfg), lag_gap(s, cfg));
}

}  // namespace

double min_gap(const WorldState& s, const EnvConfig& cfg) {
    if (!lateral_body_overlap(s, cfg)) return cfg.reward.d_safe;
    return std::min(front_gap(s, cfg), lag_gap(s, cfg));
}

TerminalEvent termination(const WorldState& s, const EnvConfig& cfg) {
    const double w = cfg.lane_width;
    if (lateral_body_overlap(s, cfg) &&
        (front_gap(s, cfg) < 0.0 || lag_gap(s, cfg) < 0.0))
        return TerminalEvent::Collision;
    if ((s.merge_station > cfg.accel_lane_length && s.merge_lateral < -0.5 * w) ||
        std::fabs(s.merge_lateral) > 1.5 * w || std::fabs(s.merge_heading) > 0.5)
        return TerminalEvent::OffRoad;
    if (std::fabs(s.merge_lateral) <= 0.3 && std::fabs(s.merge_heading) <= 0.05 &&
        min_gap(s, cfg) >= 2.0)
        return TerminalEvent::Merged;
    if (s.step >= cfg.horizon) return TerminalEvent::Timeout;
    return TerminalEvent::Running;
}

Observation observe(const WorldState& s, const EnvConfig& cfg) {
    const double w = cfg.lane_width;
    // Ramp lane center sits at y=-w; its marking toward the mainline is the
    // shared marking at y=-w/2.
    const double lane_center = (s.merge_lateral <= -0.5 * w) ? -w : 0.0;
    Observation o;
    o.v_m = s.merge_speed;
    o.p_m = s.merge_station - cfg.merge_point_station;
    o.phi_m = s.merge_heading;
    o.l_m = s.merge_lateral - (lane_center - 0.5 * w);
    o.r_m = (lane_center + 0.5 * w) - s.merge_lateral;
    o.v_f = s.front_speed;
    o.p_f = s.front_station - cfg.merge_point_station;
    o.v_l = s.lag_speed;
    o.p_l = s.lag_station - cfg.merge_point_station;
    return o;
}

double compute_reward(const WorldState& s, const Action& clamped, const EnvConfig& cfg) {
    const RewardWeights& rw = cfg.reward;
    const double gap = reward_gap(s, cfg);
    const double proximity = std::max(0.0, 1.0 - gap / rw.d_safe);
    const double slowdown = std::max(0.0, cfg.v_free - s.merge_speed) / cfg.v_free;
    return rw.accel_smooth * clamped.accel * clamped.accel +
           rw.steer_smooth * clamped.steer * clamped.steer +
           rw.safeness * proximity * proximity +
           rw.timeliness * slowdown * slowdown;
}

MergeEnv::MergeEnv(const EnvConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    // Draw order is part of the reproducibility contract:
    // p^m, v^m, gap, gap fraction, v^l, v^f.
    state_.merge_station = rng.uniform(cfg_.init.station_min, cfg_.init.station_max);
    state_.merge_lateral = -cfg_.lane_width;
    state_.merge_heading = 0.0;
    state_.merge_speed = rng.uniform(cfg_.init.speed_min, cfg_.init.speed_max);
    const double gap = rng.uniform(cfg_.init.gap_min, cfg_.init.gap_max);
    const double frac = rng.uniform(cfg_.init.gap_frac_min, cfg_.init.gap_frac_max);
    state_.lag_station = state_.merge_station - frac * gap;
    state_.front_station = state_.lag_station + gap;
    state_.lag_speed = rng.uniform(cfg_.init.main_speed_min, cfg_.init.main_speed_max);
    state_.front_speed = rng.uniform(cfg_.init.main_speed_min, cfg_.init.main_speed_max);
    state_.step = 0;
    obs_ = observe(state_, cfg_);
}

StepResult MergeEnv::step(const Action& action) {
    if (terminal()) throw ContractError("env_step: episode already terminal");
    const double dt = cfg_.dt;

    // (1) clamp
    const Action a = clamp_action(action, cfg_);

    // (2) merging-vehicle kinematic bicycle, semi-implicit Euler
    WorldState& s = state_;
    s.merge_speed = std::clamp(s.merge_speed + a.accel * dt, 0.0, cfg_.v_max);
    s.merge_heading += (s.merge_speed / cfg_.wheelbase) * std::tan(a.steer) * dt;
    s.merge_station += s.merge_speed * std::cos(s.merge_heading) * dt;
    s.merge_lateral += s.merge_speed * std::sin(s.merge_heading) * dt;

    // (3) mainline behavior rule, then mainline positions
    switch (cfg_.behavior) {
        case BehaviorMode::Neutral:
            break;
        case BehaviorMode::Cooperative: {
            // Yields preemptively: brakes to open the gap whenever the merging
            // vehicle is alongside or ahead within the safe distance, wherever
            // it is laterally. Uses the signed rear distance so a lag vehicle
            // that has already passed the merge does not brake for it.
            const double rear = s.merge_station - s.lag_station;
            if (rear >= 0.0 && rear - cfg_.vehicle_length < cfg_.reward.d_safe)
                s.lag_speed = std::max(0.0, s.lag_speed - 1.5 * dt);
            break;
        }
        case BehaviorMode::Adversarial:
            if (s.merge_lateral > -0.75 * cfg_.lane_width)
                s.lag_speed = std::min(cfg_.v_max, s.lag_speed + 1.0 * dt);
            break;
    }
    s.lag_station += s.lag_speed * dt;
    s.front_station += s.front_speed * dt;

    s.step += 1;

    // (4) termination, (5) reward
    event_ = termination(s, cfg_);
    double reward = compute_reward(s, a, cfg_);
    switch (event_) {
        case TerminalEvent::Merged: reward += cfg_.reward.bonus_merged; break;
        case TerminalEvent::Collision: reward += cfg_.reward.bonus_collision; break;
        case TerminalEvent::OffRoad: reward += cfg_.reward.bonus_off_road; break;
        case TerminalEvent::Timeout: reward += cfg_.reward.bonus_timeout; break;
        case TerminalEvent::Running: break;
    }

    obs_ = observe(s, cfg_);
    return {obs_, reward, event_ != TerminalEvent::Running, event_};
}

}  // namespace mergerl
