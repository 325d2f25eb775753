// mergerl: dataset generation, belief/Q training, evaluation, rollouts and
// gradient checks for the on-ramp merge learner. Exit codes: 0 success,
// 1 check failure, 2 usage/config error, 3 I/O error.
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mergerl.h"

namespace {

// Status values line up with the exit-code contract; runtime errors count as
// check failures for the caller.
int exit_code(mrl_status status) {
    switch (status) {
        case MRL_OK: return 0;
        case MRL_CHECK_FAILED: return 1;
        case MRL_CONFIG_ERROR: return 2;
        case MRL_IO_ERROR: return 3;
        case MRL_RUNTIME_ERROR: return 1;
    }
    return 1;
}

int finish(mrl_status status, char* summary) {
    if (summary) {
        std::printf("%s\n", summary);
        mrl_string_free(summary);
    }
    if (status != MRL_OK) std::fprintf(stderr, "error: %s\n", mrl_last_error());
    return exit_code(status);
}

struct ConfigHandle {
    mrl_config* cfg = nullptr;
    ~ConfigHandle() { mrl_config_free(cfg); }
};

// Loads --config when given, otherwise the built-in defaults.
mrl_status load_config(const std::string& path, ConfigHandle& handle) {
    if (path.empty()) return mrl_config_default(&handle.cfg);
    return mrl_config_load(path.c_str(), &handle.cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"On-ramp merge learner: simulator, LSTM belief model, continuous-action DQN"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mrl_version()));

    std::string config_path;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration (defaults when omitted)");
        cmd->add_option("--seed", seed, "base RNG seed")->capture_default_str();
    };

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a scripted-policy JSONL dataset");
    int gen_episodes = 0;
    std::string gen_out;
    add_common(gen);
    gen->add_option("--episodes", gen_episodes, "episode count (0: config default)");
    gen->add_option("--out", gen_out, "output JSONL path");

    // train-belief
    auto* tb = app.add_subcommand("train-belief", "Train the LSTM belief model on a dataset");
    std::string tb_data, tb_out, tb_loss_csv;
    bool tb_quiet = false;
    add_common(tb);
    tb->add_option("--data", tb_data, "input JSONL dataset (default: outputs.dataset)");
    tb->add_option("--out", tb_out, "belief checkpoint path (default: outputs.belief_checkpoint)");
    tb->add_option("--loss-csv", tb_loss_csv, "per-epoch loss CSV (default: <out>.loss.csv)");
    tb->add_flag("--quiet", tb_quiet, "suppress progress lines");

    // train-dqn
    auto* td = app.add_subcommand("train-dqn", "Train the Q-network against a frozen belief model");
    std::string td_belief, td_out, td_metrics;
    bool td_quiet = false;
    add_common(td);
    td->add_option("--belief", td_belief, "belief checkpoint (default: outputs.belief_checkpoint)");
    td->add_option("--out", td_out, "Q checkpoint path (default: outputs.q_checkpoint)");
    td->add_option("--metrics", td_metrics, "per-step metrics CSV (default: <out>.metrics.csv)");
    td->add_flag("--quiet", td_quiet, "suppress progress lines");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Roll out a policy without noise and report rates");
    std::string ev_belief, ev_policy;
    int ev_episodes = 100;
    add_common(ev);
    ev->add_option("--belief", ev_belief, "belief checkpoint (needed unless --policy scripted)");
    ev->add_option("--policy", ev_policy, "Q checkpoint path, 'scripted' or 'random'")->required();
    ev->add_option("--episodes", ev_episodes, "evaluation episodes")->capture_default_str();

    // rollout
    auto* ro = app.add_subcommand("rollout", "Write one episode as a trajectory CSV");
    std::string ro_belief, ro_policy, ro_out;
    add_common(ro);
    ro->add_option("--belief", ro_belief, "belief checkpoint (needed unless --policy scripted)");
    ro->add_option("--policy", ro_policy, "Q checkpoint path, 'scripted' or 'random'")->required();
    ro->add_option("--out", ro_out, "trajectory CSV path");

    // grad-check
    auto* gc = app.add_subcommand("grad-check", "Compare analytic gradients to finite differences");
    std::string gc_component = "all";
    bool gc_corrupt = false;
    gc->add_option("--seed", seed, "base RNG seed")->capture_default_str();
    gc->add_option("--component", gc_component, "mlp, lstm, qloss, belief or all")
        ->capture_default_str();
    gc->add_flag("--corrupt", gc_corrupt, "damage one gradient on purpose (failure-path hook)")
        ->group("");  // hidden from --help

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    char* summary = nullptr;
    mrl_status status = MRL_OK;

    if (gc->parsed()) {
        status = mrl_grad_check(gc_component.c_str(), seed, gc_corrupt ? 1 : 0, &summary);
        return finish(status, summary);
    }

    ConfigHandle cfg;
    const mrl_status cfg_status = load_config(config_path, cfg);
    if (cfg_status != MRL_OK) return finish(cfg_status, nullptr);

    if (gen->parsed()) {
        status = mrl_gen_data(cfg.cfg, gen_episodes, seed,
                              gen_out.empty() ? nullptr : gen_out.c_str(), &summary);
    } else if (tb->parsed()) {
        status = mrl_train_belief(cfg.cfg, tb_data.c_str(), seed, tb_out.c_str(),
                                  tb_loss_csv.empty() ? nullptr : tb_loss_csv.c_str(),
                                  tb_quiet ? 0 : 1, &summary);
    } else if (td->parsed()) {
        status = mrl_train_dqn(cfg.cfg, td_belief.c_str(), seed, td_out.c_str(),
                               td_metrics.empty() ? nullptr : td_metrics.c_str(),
                               td_quiet ? 0 : 1, &summary);
    } else if (ev->parsed()) {
        status = mrl_evaluate(cfg.cfg, ev_belief.empty() ? nullptr : ev_belief.c_str(),
                              ev_policy.c_str(), ev_episodes, seed, &summary);
    } else if (ro->parsed()) {
        status = mrl_rollout(cfg.cfg, ro_belief.empty() ? nullptr : ro_belief.c_str(),
                             ro_policy.c_str(), seed,
                             ro_out.empty() ? nullptr : ro_out.c_str(), &summary);
    } else {
        std::fprintf(stderr, "error: no subcommand\n");
        return 2;
    }
    return finish(status, summary);
}
