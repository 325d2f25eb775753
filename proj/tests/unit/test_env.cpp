#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/errors.hpp"
#include "core/merge_env.hpp"
#include "core/rng.hpp"

using namespace mergerl;

namespace {

EnvConfig pinned_config() {
    // lo == hi collapses every reset draw to a known value.
    EnvConfig cfg;
    cfg.init.station_min = cfg.init.station_max = -20.0;
    cfg.init.speed_min = cfg.init.speed_max = 20.0;
    cfg.init.gap_min = cfg.init.gap_max = 30.0;
    cfg.init.gap_frac_min = cfg.init.gap_frac_max = 0.5;
    cfg.init.main_speed_min = cfg.init.main_speed_max = 22.0;
    cfg.behavior = BehaviorMode::Neutral;
    return cfg;
}

WorldState ramp_cruise_state() {
    WorldState s;
    s.merge_station = 0.0;
    s.merge_lateral = -3.7;
    s.merge_heading = 0.0;
    s.merge_speed = 25.0;
    s.lag_station = -100.0;
    s.lag_speed = 22.0;
    s.front_station = 100.0;
    s.front_speed = 22.0;
    return s;
}

}  // namespace

TEST_CASE("straight cruise advances station by exactly v dt") {
    EnvConfig cfg = pinned_config();
    MergeEnv env(cfg, 1);
    REQUIRE(env.state().merge_station == -20.0);
    REQUIRE(env.state().merge_speed == 20.0);
    env.step({0.0, 0.0});
    CHECK(env.state().merge_station == doctest::Approx(-18.0).epsilon(1e-15));
    CHECK(env.state().merge_speed == 20.0);
    CHECK(env.state().merge_heading == 0.0);
    CHECK(env.state().merge_lateral == -3.7);
}

TEST_CASE("acceleration applies before the position update") {
    EnvConfig cfg = pinned_config();
    MergeEnv env(cfg, 1);
    env.step({2.0, 0.0});
    CHECK(env.state().merge_speed == doctest::Approx(20.2).epsilon(1e-15));
    CHECK(env.state().merge_station == doctest::Approx(-20.0 + 2.02).epsilon(1e-15));
}

TEST_CASE("steering integrates the bicycle heading") {
    EnvConfig cfg = pinned_config();
    MergeEnv env(cfg, 1);
    env.step({0.0, 0.1});
    const double phi = (20.0 / 2.8) * std::tan(0.1) * 0.1;
    CHECK(phi == doctest::Approx(0.07166762291817896).epsilon(1e-15));
    CHECK(env.state().merge_heading == doctest::Approx(phi).epsilon(1e-15));
    CHECK(env.state().merge_station ==
          doctest::Approx(-20.0 + 20.0 * std::cos(phi) * 0.1).epsilon(1e-15));
    CHECK(env.state().merge_lateral ==
          doctest::Approx(-3.7 + 20.0 * std::sin(phi) * 0.1).epsilon(1e-15));
}

TEST_CASE("actions are clamped to the configured bounds") {
    EnvConfig cfg = pinned_config();
    const Action a = clamp_action({100.0, -100.0}, cfg);
    CHECK(a.accel == 3.0);
    CHECK(a.steer == -0.262);
    MergeEnv env(cfg, 1);
    env.step({100.0, 0.0});
    CHECK(env.state().merge_speed == doctest::Approx(20.3).epsilon(1e-15));
}

TEST_CASE("speed saturates at v_max and at zero") {
    EnvConfig cfg = pinned_config();
    cfg.init.speed_min = cfg.init.speed_max = 34.9;
    MergeEnv env(cfg, 1);
    env.step({3.0, 0.0});
    CHECK(env.state().merge_speed == 35.0);

    EnvConfig slow = pinned_config();
    slow.init.speed_min = slow.init.speed_max = 0.3;
    MergeEnv env2(slow, 1);
    env2.step({-4.5, 0.0});
    CHECK(env2.state().merge_speed == 0.0);
}

TEST_CASE("reward is zero for an ideal cruise") {
    EnvConfig cfg;
    const WorldState s = ramp_cruise_state();
    CHECK(compute_reward(s, {0.0, 0.0}, cfg) == 0.0);
}

TEST_CASE("acceleration penalty is quadratic") {
    EnvConfig cfg;
    const WorldState s = ramp_cruise_state();
    CHECK(compute_reward(s, {2.0, 0.0}, cfg) == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("steering penalty is quadratic") {
    EnvConfig cfg;
    const WorldState s = ramp_cruise_state();
    CHECK(compute_reward(s, {0.0, 0.1}, cfg) == doctest::Approx(-0.05).epsilon(1e-12));
}

TEST_CASE("standstill costs the full slowdown penalty") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();
    s.merge_speed = 0.0;
    CHECK(compute_reward(s, {0.0, 0.0}, cfg) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("speeds above free flow carry no slowdown penalty") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();
    s.merge_speed = 30.0;
    CHECK(compute_reward(s, {0.0, 0.0}, cfg) == 0.0);
}

TEST_CASE("proximity penalty engages once inside the lane and below d_safe") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();
    s.merge_lateral = 0.0;
    s.front_station = s.merge_station + 9.5;  // front gap 5.0
    // proximity = 1 - 5/10 = 0.5; term = -10 * 0.25
    CHECK(compute_reward(s, {0.0, 0.0}, cfg) == doctest::Approx(-2.5).epsilon(1e-12));

    // Same longitudinal picture from the ramp center: no proximity term.
    s.merge_lateral = -3.7;
    CHECK(compute_reward(s, {0.0, 0.0}, cfg) == 0.0);
}

TEST_CASE("shaped reward is never positive") {
    EnvConfig cfg;
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
        WorldState s;
        s.merge_station = rng.uniform(-50.0, 250.0);
        s.merge_lateral = rng.uniform(-6.0, 6.0);
        s.merge_heading = rng.uniform(-0.6, 0.6);
        s.merge_speed = rng.uniform(0.0, 35.0);
        s.lag_station = s.merge_station + rng.uniform(-40.0, 40.0);
        s.front_station = s.merge_station + rng.uniform(-40.0, 40.0);
        const Action a = {rng.uniform(-4.5, 3.0), rng.uniform(-0.262, 0.262)};
        CHECK(compute_reward(s, a, cfg) <= 0.0);
    }
}

TEST_CASE("min_gap takes the smaller bumper clearance under body overlap") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();
    s.merge_lateral = 0.0;
    s.front_station = s.merge_station + 10.0;  // bumper gap 5.5
    s.lag_station = s.merge_station - 100.0;
    CHECK(min_gap(s, cfg) == doctest::Approx(5.5).epsilon(1e-15));
    s.lag_station = s.merge_station - 8.0;  // bumper gap 3.5, now the binding one
    CHECK(min_gap(s, cfg) == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("min_gap reports d_safe without lateral body overlap") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();
    s.merge_lateral = -2.0;  // |y| > vehicle width
    s.front_station = s.merge_station + 1.0;
    CHECK(min_gap(s, cfg) == 10.0);
}

TEST_CASE("gaps are order-free in station") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();
    s.merge_lateral = 0.0;
    // Merging vehicle fully ahead of the front vehicle: clear, not colliding.
    s.front_station = s.merge_station - 10.0;
    s.lag_station = s.merge_station - 100.0;
    CHECK(min_gap(s, cfg) == doctest::Approx(5.5).epsilon(1e-15));
    CHECK(termination(s, cfg) != TerminalEvent::Collision);
    // Slide to partial overlap from the far side.
    s.front_station = s.merge_station - 3.0;
    CHECK(termination(s, cfg) == TerminalEvent::Collision);
}

TEST_CASE("termination covers each event and its priority") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();
    CHECK(termination(s, cfg) == TerminalEvent::Running);

    SUBCASE("collision requires both overlaps") {
        s.merge_lateral = 0.0;
        s.front_station = s.merge_station + 4.0;  // |dp| < vehicle length
        CHECK(termination(s, cfg) == TerminalEvent::Collision);
        s.merge_lateral = -2.0;
        CHECK(termination(s, cfg) != TerminalEvent::Collision);
    }
    SUBCASE("running past the ramp end while still on it is off-road") {
        s.merge_station = 200.5;
        CHECK(termination(s, cfg) == TerminalEvent::OffRoad);
        s.merge_lateral = 0.0;  // already in the mainline lane: fine
        s.front_station = 320.0;
        s.lag_station = 150.0;
        CHECK(termination(s, cfg) == TerminalEvent::Merged);
    }
    SUBCASE("large lateral excursion is off-road") {
        s.merge_lateral = 5.56;
        CHECK(termination(s, cfg) == TerminalEvent::OffRoad);
    }
    SUBCASE("extreme heading is off-road") {
        s.merge_heading = 0.51;
        CHECK(termination(s, cfg) == TerminalEvent::OffRoad);
    }
    SUBCASE("merged needs alignment and clearance") {
        s.merge_lateral = 0.2;
        s.merge_heading = 0.04;
        CHECK(termination(s, cfg) == TerminalEvent::Merged);
        s.front_station = s.merge_station + 6.0;  // bumper gap 1.5 < 2
        CHECK(termination(s, cfg) == TerminalEvent::Running);
    }
    SUBCASE("timeout at the horizon") {
        s.step = 300;
        CHECK(termination(s, cfg) == TerminalEvent::Timeout);
    }
    SUBCASE("collision outranks off-road") {
        s.merge_lateral = 0.0;
        s.merge_heading = 0.6;
        s.front_station = s.merge_station + 2.0;
        CHECK(termination(s, cfg) == TerminalEvent::Collision);
    }
    SUBCASE("collision outranks merged and timeout") {
        s.merge_lateral = 0.2;
        s.front_station = s.merge_station + 2.0;
        s.step = 301;
        CHECK(termination(s, cfg) == TerminalEvent::Collision);
    }
    SUBCASE("off-road outranks timeout") {
        s.merge_lateral = -5.7;
        s.step = 301;
        CHECK(termination(s, cfg) == TerminalEvent::OffRoad);
    }
    SUBCASE("merged outranks timeout") {
        s.merge_lateral = 0.0;
        s.step = 301;
        CHECK(termination(s, cfg) == TerminalEvent::Merged);
    }
}

TEST_CASE("lane margins split the lane width on both lanes") {
    EnvConfig cfg;
    WorldState s = ramp_cruise_state();

    s.merge_lateral = -0.925;  // mainline lane, a quarter width below center
    Observation o = observe(s, cfg);
    CHECK(o.l_m == doctest::Approx(0.925).epsilon(1e-15));
    CHECK(o.r_m == doctest::Approx(2.775).epsilon(1e-15));

    s.merge_lateral = -3.7;  // ramp center
    o = observe(s, cfg);
    CHECK(o.l_m == doctest::Approx(1.85).epsilon(1e-15));
    CHECK(o.r_m == doctest::Approx(1.85).epsilon(1e-15));

    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        s.merge_lateral = rng.uniform(-6.0, 6.0);
        o = observe(s, cfg);
        CHECK(o.l_m + o.r_m == doctest::Approx(3.7).epsilon(1e-14));
    }
}

TEST_CASE("observation stations are relative to the merge point") {
    EnvConfig cfg;
    cfg.merge_point_station = 50.0;
    WorldState s = ramp_cruise_state();
    s.merge_station = 60.0;
    s.front_station = 100.0;
    s.lag_station = 30.0;
    const Observation o = observe(s, cfg);
    CHECK(o.p_m == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(o.p_f == doctest::Approx(50.0).epsilon(1e-15));
    CHECK(o.p_l == doctest::Approx(-20.0).epsilon(1e-15));
    CHECK(o.v_m == 25.0);
    CHECK(o.v_f == 22.0);
    CHECK(o.v_l == 22.0);
    CHECK(o.phi_m == 0.0);
}

TEST_CASE("observation array order round-trips") {
    Observation o;
    o.v_m = 1; o.p_m = 2; o.phi_m = 3; o.l_m = 4; o.r_m = 5;
    o.v_f = 6; o.p_f = 7; o.v_l = 8; o.p_l = 9;
    const auto a = o.as_array();
    for (int i = 0; i < 9; ++i) CHECK(a[i] == i + 1);
    const Observation back = Observation::from_array(a);
    CHECK(back.as_array() == a);
}

TEST_CASE("reset draws stay inside the configured ranges") {
    EnvConfig cfg;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        MergeEnv env(cfg, seed);
        const WorldState& s = env.state();
        CHECK(s.merge_station >= -30.0);
        CHECK(s.merge_station <= -10.0);
        CHECK(s.merge_speed >= 15.0);
        CHECK(s.merge_speed <= 20.0);
        CHECK(s.merge_lateral == -3.7);
        CHECK(s.merge_heading == 0.0);
        CHECK(s.step == 0);
        const double gap = s.front_station - s.lag_station;
        CHECK(gap >= 25.0);
        CHECK(gap <= 45.0);
        const double frac = (s.merge_station - s.lag_station) / gap;
        CHECK(frac >= 0.25);
        CHECK(frac <= 0.75);
        CHECK(s.lag_speed >= 20.0);
        CHECK(s.lag_speed <= 27.0);
        CHECK(s.front_speed >= 20.0);
        CHECK(s.front_speed <= 27.0);
    }
}

TEST_CASE("episodes are reproducible from the seed") {
    EnvConfig cfg;
    MergeEnv a(cfg, 123), b(cfg, 123), c(cfg, 124);
    Rng actions(55);
    bool c_differs = false;
    for (int t = 0; t < 100 && !a.terminal(); ++t) {
        const Action act = {actions.uniform(-4.5, 3.0), actions.uniform(-0.262, 0.262)};
        const StepResult ra = a.step(act);
        const StepResult rb = b.step(act);
        CHECK(ra.reward == rb.reward);
        CHECK(ra.event == rb.event);
        CHECK(a.state().merge_station == b.state().merge_station);
        CHECK(a.state().merge_lateral == b.state().merge_lateral);
        CHECK(a.state().lag_station == b.state().lag_station);
        if (!c.terminal()) {
            c.step(act);
            c_differs |= (a.state().merge_station != c.state().merge_station);
        }
    }
    CHECK(c_differs);
}

TEST_CASE("neutral mainline vehicles hold their speeds") {
    EnvConfig cfg = pinned_config();
    MergeEnv env(cfg, 9);
    const double v_l = env.state().lag_speed;
    const double v_f = env.state().front_speed;
    for (int t = 0; t < 50 && !env.terminal(); ++t) {
        env.step({0.5, 0.0});
        CHECK(env.state().lag_speed == v_l);
        CHECK(env.state().front_speed == v_f);
    }
}

TEST_CASE("cooperative lag speed is non-increasing") {
    EnvConfig cfg;
    cfg.behavior = BehaviorMode::Cooperative;
    for (std::uint64_t seed : {3ull, 8ull, 21ull}) {
        MergeEnv env(cfg, seed);
        Rng actions(seed + 100);
        double prev = env.state().lag_speed;
        for (int t = 0; t < 300 && !env.terminal(); ++t) {
            env.step({actions.uniform(-1.0, 1.0), actions.uniform(-0.1, 0.1)});
            CHECK(env.state().lag_speed <= prev);
            CHECK(env.state().front_speed == doctest::Approx(env.state().front_speed));
            prev = env.state().lag_speed;
        }
    }
}

TEST_CASE("cooperative lag brakes while the merger sits just ahead") {
    EnvConfig cfg = pinned_config();
    cfg.behavior = BehaviorMode::Cooperative;
    // frac 0.25 of a 30 m gap puts the lag 7.5 m behind: inside d_safe + length.
    cfg.init.gap_frac_min = cfg.init.gap_frac_max = 0.25;
    MergeEnv env(cfg, 2);
    const double before = env.state().lag_speed;
    env.step({0.0, 0.0});
    CHECK(env.state().lag_speed == doctest::Approx(before - 0.15).epsilon(1e-12));
}

TEST_CASE("adversarial lag accelerates once the merger approaches the lane") {
    EnvConfig cfg;
    cfg.behavior = BehaviorMode::Adversarial;
    for (std::uint64_t seed : {5ull, 13ull}) {
        MergeEnv env(cfg, seed);
        double prev = env.state().lag_speed;
        Rng actions(seed);
        for (int t = 0; t < 300 && !env.terminal(); ++t) {
            env.step({actions.uniform(-1.0, 1.0), actions.uniform(-0.262, 0.262)});
            const double now = env.state().lag_speed;
            CHECK(now >= prev);
            if (env.state().merge_lateral > -0.75 * 3.7 && prev < 35.0)
                CHECK(now == doctest::Approx(std::min(35.0, prev + 0.1)).epsilon(1e-12));
            else
                CHECK(now == prev);
            prev = now;
        }
    }
}

TEST_CASE("a short horizon ends in a timeout with its penalty") {
    EnvConfig cfg = pinned_config();
    cfg.horizon = 5;
    MergeEnv env(cfg, 1);
    StepResult last;
    for (int t = 0; t < 5; ++t) {
        CHECK_FALSE(env.terminal());
        last = env.step({0.0, 0.0});
    }
    CHECK(last.terminal);
    CHECK(last.event == TerminalEvent::Timeout);
    CHECK(env.steps() == 5);
    CHECK(last.reward < -19.9);  // includes the timeout bonus
}

TEST_CASE("sustained hard steering runs off the road quickly") {
    EnvConfig cfg = pinned_config();
    MergeEnv env(cfg, 1);
    int t = 0;
    StepResult r;
    while (!env.terminal() && t < 20) {
        r = env.step({0.0, 0.262});
        ++t;
    }
    CHECK(r.event == TerminalEvent::OffRoad);
    CHECK(r.reward < -20.0);  // off-road bonus plus shaped penalties
}

TEST_CASE("stepping a terminal episode is a contract error") {
    EnvConfig cfg = pinned_config();
    cfg.horizon = 2;
    MergeEnv env(cfg, 1);
    env.step({0.0, 0.0});
    env.step({0.0, 0.0});
    CHECK(env.terminal());
    CHECK_THROWS_AS(env.step({0.0, 0.0}), ContractError);
}

TEST_CASE("mode and event names round-trip") {
    for (BehaviorMode m : {BehaviorMode::Cooperative, BehaviorMode::Adversarial,
                           BehaviorMode::Neutral})
        CHECK(behavior_mode_from_name(behavior_mode_name(m)) == m);
    for (TerminalEvent e : {TerminalEvent::Running, TerminalEvent::Merged,
                            TerminalEvent::Collision, TerminalEvent::OffRoad,
                            TerminalEvent::Timeout})
        CHECK(event_from_name(event_name(e)) == e);
    CHECK_THROWS_AS(behavior_mode_from_name("bogus"), ConfigError);
    CHECK_THROWS_AS(event_from_name("bogus"), ParseError);
}

TEST_CASE("config validation rejects broken settings") {
    EnvConfig cfg;
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = EnvConfig{};
    cfg.accel_min = 5.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = EnvConfig{};
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = EnvConfig{};
    cfg.reward.safeness = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
