#include "core/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"

namespace mergerl {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        throw ConfigError("config: " + where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed)
            if (key == a) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("config: unknown key " + where + "." + key);
    }
}

void get_num(const json& obj, const std::string& where, const char* key, double& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number())
        throw ConfigError("config: " + where + "." + key + " must be a number");
    out = it->get<double>();
}

void get_int(const json& obj, const std::string& where, const char* key, int& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number_integer())
        throw ConfigError("config: " + where + "." + key + " must be an integer");
    out = it->get<int>();
}

void get_i64(const json& obj, const std::string& where, const char* key, std::int64_t& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number_integer())
        throw ConfigError("config: " + where + "." + key + " must be an integer");
    out = it->get<std::int64_t>();
}

void get_size(const json& obj, const std::string& where, const char* key, std::size_t& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
        throw ConfigError("config: " + where + "." + key + " must be a nonnegative integer");
    out = static_cast<std::size_t>(it->get<std::int64_t>());
}

void get_str(const json& obj, const std::string& where, const char* key, std::string& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_string())
        throw ConfigError("config: " + where + "." + key + " must be a string");
    out = it->get<std::string>();
}

void parse_reward(const json& obj, RewardWeights& r) {
    check_keys(obj, "reward",
               {"accel_smooth", "steer_smooth", "safeness", "timeliness", "d_safe",
                "bonus_merged", "bonus_collision", "bonus_off_road", "bonus_timeout"});
    get_num(obj, "reward", "accel_smooth", r.accel_smooth);
    get_num(obj, "reward", "steer_smooth", r.steer_smooth);
    get_num(obj, "reward", "safeness", r.safeness);
    get_num(obj, "reward", "timeliness", r.timeliness);
    get_num(obj, "reward", "d_safe", r.d_safe);
    get_num(obj, "reward", "bonus_merged", r.bonus_merged);
    get_num(obj, "reward", "bonus_collision", r.bonus_collision);
    get_num(obj, "reward", "bonus_off_road", r.bonus_off_road);
    get_num(obj, "reward", "bonus_timeout", r.bonus_timeout);
}

void parse_init(const json& obj, InitRanges& r) {
    check_keys(obj, "env.init",
               {"station_min", "station_max", "speed_min", "speed_max", "gap_min", "gap_max",
                "main_speed_min", "main_speed_max", "gap_frac_min", "gap_frac_max"});
    get_num(obj, "env.init", "station_min", r.station_min);
    get_num(obj, "env.init", "station_max", r.station_max);
    get_num(obj, "env.init", "speed_min", r.speed_min);
    get_num(obj, "env.init", "speed_max", r.speed_max);
    get_num(obj, "env.init", "gap_min", r.gap_min);
    get_num(obj, "env.init", "gap_max", r.gap_max);
    get_num(obj, "env.init", "main_speed_min", r.main_speed_min);
    get_num(obj, "env.init", "main_speed_max", r.main_speed_max);
    get_num(obj, "env.init", "gap_frac_min", r.gap_frac_min);
    get_num(obj, "env.init", "gap_frac_max", r.gap_frac_max);
}

void parse_env(const json& obj, EnvConfig& env) {
    check_keys(obj, "env",
               {"dt", "lane_width", "accel_lane_length", "merge_point_station", "wheelbase",
                "vehicle_length", "vehicle_width", "accel_min", "accel_max", "steer_min",
                "steer_max", "v_max", "v_free", "behavior", "horizon", "init"});
    get_num(obj, "env", "dt", env.dt);
    get_num(obj, "env", "lane_width", env.lane_width);
    get_num(obj, "env", "accel_lane_length", env.accel_lane_length);
    get_num(obj, "env", "merge_point_station", env.merge_point_station);
    get_num(obj, "env", "wheelbase", env.wheelbase);
    get_num(obj, "env", "vehicle_length", env.vehicle_length);
    get_num(obj, "env", "vehicle_width", env.vehicle_width);
    get_num(obj, "env", "accel_min", env.accel_min);
    get_num(obj, "env", "accel_max", env.accel_max);
    get_num(obj, "env", "steer_min", env.steer_min);
    get_num(obj, "env", "steer_max", env.steer_max);
    get_num(obj, "env", "v_max", env.v_max);
    get_num(obj, "env", "v_free", env.v_free);
    get_int(obj, "env", "horizon", env.horizon);
    std::string behavior;
    get_str(obj, "env", "behavior", behavior);
    if (!behavior.empty()) {
        try {
            env.behavior = behavior_mode_from_name(behavior);
        } catch (const ConfigError&) {
            throw ConfigError("config: env.behavior must be cooperative, adversarial or neutral");
        }
    }
    if (obj.contains("init")) parse_init(obj.at("init"), env.init);
}

void parse_scripted(const json& obj, ScriptedPolicyParams& p) {
    check_keys(obj, "scripted",
               {"gap_min", "speed_gain", "lateral_gain", "heading_gain", "engage_margin"});
    get_num(obj, "scripted", "gap_min", p.gap_min);
    get_num(obj, "scripted", "speed_gain", p.speed_gain);
    get_num(obj, "scripted", "lateral_gain", p.lateral_gain);
    get_num(obj, "scripted", "heading_gain", p.heading_gain);
    get_num(obj, "scripted", "engage_margin", p.engage_margin);
}

void parse_belief(const json& obj, BeliefHyper& b) {
    check_keys(obj, "belief",
               {"hidden", "obs_head_width", "epochs", "truncation", "batch_windows",
                "learning_rate", "holdout_frac", "dataset_episodes"});
    get_size(obj, "belief", "hidden", b.hidden);
    get_size(obj, "belief", "obs_head_width", b.obs_head_width);
    get_int(obj, "belief", "epochs", b.epochs);
    get_int(obj, "belief", "truncation", b.truncation);
    get_int(obj, "belief", "batch_windows", b.batch_windows);
    get_num(obj, "belief", "learning_rate", b.learning_rate);
    get_num(obj, "belief", "holdout_frac", b.holdout_frac);
    get_int(obj, "belief", "dataset_episodes", b.dataset_episodes);
}

void parse_train(const json& obj, TrainConfig& t) {
    check_keys(obj, "train",
               {"gamma", "target_sync", "minibatch", "episodes", "replay_capacity", "warmup",
                "learning_rate", "noise_start", "noise_end", "anneal_fraction",
                "total_env_steps", "eval_period", "eval_episodes", "trunk_width"});
    get_num(obj, "train", "gamma", t.gamma);
    get_int(obj, "train", "target_sync", t.target_sync);
    get_int(obj, "train", "minibatch", t.minibatch);
    get_int(obj, "train", "episodes", t.episodes);
    get_size(obj, "train", "replay_capacity", t.replay_capacity);
    get_int(obj, "train", "warmup", t.warmup);
    get_num(obj, "train", "learning_rate", t.learning_rate);
    get_num(obj, "train", "noise_start", t.noise_start);
    get_num(obj, "train", "noise_end", t.noise_end);
    get_num(obj, "train", "anneal_fraction", t.anneal_fraction);
    get_i64(obj, "train", "total_env_steps", t.total_env_steps);
    get_int(obj, "train", "eval_period", t.eval_period);
    get_int(obj, "train", "eval_episodes", t.eval_episodes);
    get_size(obj, "train", "trunk_width", t.trunk_width);
}

void parse_outputs(const json& obj, OutputPaths& o) {
    check_keys(obj, "outputs",
               {"dataset", "belief_checkpoint", "q_checkpoint", "metrics", "belief_loss_csv",
                "rollout"});
    get_str(obj, "outputs", "dataset", o.dataset);
    get_str(obj, "outputs", "belief_checkpoint", o.belief_checkpoint);
    get_str(obj, "outputs", "q_checkpoint", o.q_checkpoint);
    get_str(obj, "outputs", "metrics", o.metrics);
    get_str(obj, "outputs", "belief_loss_csv", o.belief_loss_csv);
    get_str(obj, "outputs", "rollout", o.rollout);
}

}  // namespace

void RunConfig::validate() const {
    env.validate();
    scripted.validate();
    belief.validate();
    train.validate();
}

RunConfig run_config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    check_keys(root, "$", {"env", "reward", "scripted", "belief", "train", "outputs"});

    RunConfig cfg;
    if (root.contains("env")) parse_env(root.at("env"), cfg.env);
    if (root.contains("reward")) parse_reward(root.at("reward"), cfg.env.reward);
    if (root.contains("scripted")) parse_scripted(root.at("scripted"), cfg.scripted);
    if (root.contains("belief")) parse_belief(root.at("belief"), cfg.belief);
    if (root.contains("train")) parse_train(root.at("train"), cfg.train);
    if (root.contains("outputs")) parse_outputs(root.at("outputs"), cfg.outputs);
    cfg.validate();
    return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json root;
    json& env = root["env"];
    env["dt"] = cfg.env.dt;
    env["lane_width"] = cfg.env.lane_width;
    env["accel_lane_length"] = cfg.env.accel_lane_length;
    env["merge_point_station"] = cfg.env.merge_point_station;
    env["wheelbase"] = cfg.env.wheelbase;
    env["vehicle_length"] = cfg.env.vehicle_length;
    env["vehicle_width"] = cfg.env.vehicle_width;
    env["accel_min"] = cfg.env.accel_min;
    env["accel_max"] = cfg.env.accel_max;
    env["steer_min"] = cfg.env.steer_min;
    env["steer_max"] = cfg.env.steer_max;
    env["v_max"] = cfg.env.v_max;
    env["v_free"] = cfg.env.v_free;
    env["behavior"] = behavior_mode_name(cfg.env.behavior);
    env["horizon"] = cfg.env.horizon;
    json& init = env["init"];
    init["station_min"] = cfg.env.init.station_min;
    init["station_max"] = cfg.env.init.station_max;
    init["speed_min"] = cfg.env.init.speed_min;
    init["speed_max"] = cfg.env.init.speed_max;
    init["gap_min"] = cfg.env.init.gap_min;
    init["gap_max"] = cfg.env.init.gap_max;
    init["main_speed_min"] = cfg.env.init.main_speed_min;
    init["main_speed_max"] = cfg.env.init.main_speed_max;
    init["gap_frac_min"] = cfg.env.init.gap_frac_min;
    init["gap_frac_max"] = cfg.env.init.gap_frac_max;

    json& reward = root["reward"];
    reward["accel_smooth"] = cfg.env.reward.accel_smooth;
    reward["steer_smooth"] = cfg.env.reward.steer_smooth;
    reward["safeness"] = cfg.env.reward.safeness;
    reward["timeliness"] = cfg.env.reward.timeliness;
    reward["d_safe"] = cfg.env.reward.d_safe;
    reward["bonus_merged"] = cfg.env.reward.bonus_merged;
    reward["bonus_collision"] = cfg.env.reward.bonus_collision;
    reward["bonus_off_road"] = cfg.env.reward.bonus_off_road;
    reward["bonus_timeout"] = cfg.env.reward.bonus_timeout;

    json& scripted = root["scripted"];
    scripted["gap_min"] = cfg.scripted.gap_min;
    scripted["speed_gain"] = cfg.scripted.speed_gain;
    scripted["lateral_gain"] = cfg.scripted.lateral_gain;
    scripted["heading_gain"] = cfg.scripted.heading_gain;
    scripted["engage_margin"] = cfg.scripted.engage_margin;

    json& belief = root["belief"];
    belief["hidden"] = cfg.belief.hidden;
    belief["obs_head_width"] = cfg.belief.obs_head_width;
    belief["epochs"] = cfg.belief.epochs;
    belief["truncation"] = cfg.belief.truncation;
    belief["batch_windows"] = cfg.belief.batch_windows;
    belief["learning_rate"] = cfg.belief.learning_rate;
    belief["holdout_frac"] = cfg.belief.holdout_frac;
    belief["dataset_episodes"] = cfg.belief.dataset_episodes;

    json& train = root["train"];
    train["gamma"] = cfg.train.gamma;
    train["target_sync"] = cfg.train.target_sync;
    train["minibatch"] = cfg.train.minibatch;
    train["episodes"] = cfg.train.episodes;
    train["replay_capacity"] = cfg.train.replay_capacity;
    train["warmup"] = cfg.train.warmup;
    train["learning_rate"] = cfg.train.learning_rate;
    train["noise_start"] = cfg.train.noise_start;
    train["noise_end"] = cfg.train.noise_end;
    train["anneal_fraction"] = cfg.train.anneal_fraction;
    train["total_env_steps"] = cfg.train.total_env_steps;
    train["eval_period"] = cfg.train.eval_period;
    train["eval_episodes"] = cfg.train.eval_episodes;
    train["trunk_width"] = cfg.train.trunk_width;

    json& outputs = root["outputs"];
    outputs["dataset"] = cfg.outputs.dataset;
    outputs["belief_checkpoint"] = cfg.outputs.belief_checkpoint;
    outputs["q_checkpoint"] = cfg.outputs.q_checkpoint;
    outputs["metrics"] = cfg.outputs.metrics;
    outputs["belief_loss_csv"] = cfg.outputs.belief_loss_csv;
    outputs["rollout"] = cfg.outputs.rollout;

    return root.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json(buf.str());
}

}  // namespace mergerl
