#pragma once

#include <cstdint>

#include "core/tensor.hpp"

namespace mergerl {

struct AdamConfig {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moment accumulators, keyed like the parameter set they track.
struct AdamState {
    AdamConfig config;
    NamedTensors m;  // first moments
    NamedTensors v;  // second moments
    std::int64_t step = 0;

    static AdamState init(const ParamRefs& params, const AdamConfig& config);
};

// One bias-corrected descent step: params <- params - alpha * m_hat / (sqrt(v_hat) + eps).
// Throws NumericError naming the tensor if a gradient component is non-finite.
// Gradients absent from `grads` are treated as zero.
void adam_step(const ParamRefs& params, const NamedTensors& grads, AdamState& state);

}  // namespace mergerl
