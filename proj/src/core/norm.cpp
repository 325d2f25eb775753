#include "core/norm.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace mergerl {

NormStats::NormStats() {
    obs_std.fill(1.0);
    act_std.fill(1.0);
}

NormStats NormStats::from_episodes(const TrajectoryDataset& ds,
                                   const std::vector<std::size_t>& episode_indices) {
    if (episode_indices.empty()) throw ContractError("norm stats: no episodes");

    std::array<double, 11> sum{}, sumsq{};
    std::size_t n = 0;
    for (std::size_t e : episode_indices) {
        const Episode& ep = ds.episodes.at(e);
        for (std::size_t i = 0; i < ep.size(); ++i) {
            const auto o = ep.observations[i].as_array();
            for (std::size_t k = 0; k < 9; ++k) {
                sum[k] += o[k];
                sumsq[k] += o[k] * o[k];
            }
            sum[9] += ep.actions[i].accel;
            sumsq[9] += ep.actions[i].accel * ep.actions[i].accel;
            sum[10] += ep.actions[i].steer;
            sumsq[10] += ep.actions[i].steer * ep.actions[i].steer;
            ++n;
        }
    }
    if (n == 0) throw ContractError("norm stats: dataset has no steps");

    NormStats s;
    const double dn = static_cast<double>(n);
    for (std::size_t k = 0; k < 11; ++k) {
        const double mean = sum[k] / dn;
        const double var = std::max(0.0, sumsq[k] / dn - mean * mean);
        const double sd = std::max(kStdFloor, std::sqrt(var));
        if (k < 9) {
            s.obs_mean[k] = mean;
            s.obs_std[k] = sd;
        } else {
            s.act_mean[k - 9] = mean;
            s.act_std[k - 9] = sd;
        }
    }
    return s;
}

std::array<double, 9> NormStats::normalize_obs(const Observation& obs) const {
    const auto o = obs.as_array();
    std::array<double, 9> z{};
    for (std::size_t k = 0; k < 9; ++k) z[k] = (o[k] - obs_mean[k]) / obs_std[k];
    return z;
}

Observation NormStats::denormalize_obs(const std::array<double, 9>& z) const {
    std::array<double, 9> o{};
    for (std::size_t k = 0; k < 9; ++k) o[k] = z[k] * obs_std[k] + obs_mean[k];
    return Observation::from_array(o);
}

std::array<double, 2> NormStats::normalize_action(const Action& a) const {
    return {(a.accel - act_mean[0]) / act_std[0], (a.steer - act_mean[1]) / act_std[1]};
}

}  // namespace mergerl
