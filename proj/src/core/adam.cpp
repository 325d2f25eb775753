#include "core/adam.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace mergerl {

AdamState AdamState::init(const ParamRefs& params, const AdamConfig& config) {
    AdamState state;
    state.config = config;
    for (const auto& p : params) {
        state.m[p.name] = Tensor::zeros_like(*p.tensor);
        state.v[p.name] = Tensor::zeros_like(*p.tensor);
    }
    return state;
}

void adam_step(const ParamRefs& params, const NamedTensors& grads, AdamState& state) {
    state.step += 1;
    const double b1 = state.config.beta1;
    const double b2 = state.config.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (const auto& p : params) {
        auto git = grads.find(p.name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        if (!g.same_shape(*p.tensor))
            throw ShapeError("adam_step: gradient shape mismatch for " + p.name);
        auto mit = state.m.find(p.name);
        auto vit = state.v.find(p.name);
        if (mit == state.m.end() || vit == state.v.end())
            throw ContractError("adam_step: no moment state for " + p.name);

        Tensor& m = mit->second;
        Tensor& v = vit->second;
        Tensor& w = *p.tensor;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g.data[k];
            if (!std::isfinite(gk))
                throw NumericError("adam_step: non-finite gradient in " + p.name);
            m.data[k] = b1 * m.data[k] + (1.0 - b1) * gk;
            v.data[k] = b2 * v.data[k] + (1.0 - b2) * gk * gk;
            const double m_hat = m.data[k] / correction1;
            const double v_hat = v.data[k] / correction2;
            w.data[k] -= state.config.alpha * m_hat / (std::sqrt(v_hat) + state.config.eps);
        }
    }
}

}  // namespace mergerl
