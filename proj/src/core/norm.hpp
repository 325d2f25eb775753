#pragma once

#include <array>

#include "core/merge_env.hpp"
#include "core/scripted.hpp"

namespace mergerl {

// Per-feature normalization for the 9 observation features and 2 action
// features, computed on the training split. Standard deviations are floored
// at 1e-6 so constant features stay well defined.
struct NormStats {
    static constexpr double kStdFloor = 1e-6;

    std::array<double, 9> obs_mean{};
    std::array<double, 9> obs_std{};
    std::array<double, 2> act_mean{};
    std::array<double, 2> act_std{};

    NormStats();

    static NormStats from_episodes(const TrajectoryDataset& ds,
                                   const std::vector<std::size_t>& episode_indices);

    std::array<double, 9> normalize_obs(const Observation& obs) const;
    Observation denormalize_obs(const std::array<double, 9>& z) const;
    std::array<double, 2> normalize_action(const Action& a) const;
};

}  // namespace mergerl
