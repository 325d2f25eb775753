#include "core/grad_check.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace mergerl {

NamedTensors finite_diff_grad(const std::function<double()>& f, const ParamRefs& params,
                              double h) {
    if (!(h > 0.0)) throw ContractError("finite_diff_grad: h must be positive");
    NamedTensors grads;
    for (const auto& p : params) {
        Tensor g = Tensor::zeros_like(*p.tensor);
        for (std::size_t k = 0; k < p.tensor->size(); ++k) {
            const double saved = p.tensor->data[k];
            p.tensor->data[k] = saved + h;
            const double plus = f();
            p.tensor->data[k] = saved - h;
            const double minus = f();
            p.tensor->data[k] = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus))
                throw NumericError("finite_diff_grad: f non-finite near " + p.name);
            g.data[k] = (plus - minus) / (2.0 * h);
        }
        grads[p.name] = std::move(g);
    }
    return grads;
}

GradCheckResult compare_grads(const NamedTensors& analytic, const NamedTensors& numeric) {
    GradCheckResult result;
    for (const auto& [name, num] : numeric) {
        auto it = analytic.find(name);
        const Tensor* ana = (it == analytic.end()) ? nullptr : &it->second;
        if (ana && !ana->same_shape(num))
            throw ShapeError("compare_grads: shape mismatch for " + name);
        for (std::size_t k = 0; k < num.size(); ++k) {
            const double a = ana ? ana->data[k] : 0.0;
            const double n = num.data[k];
            const double denom = std::max({1.0, std::fabs(a), std::fabs(n)});
            const double rel = std::fabs(a - n) / denom;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_tensor = name;
                result.worst_index = k;
            }
        }
    }
    return result;
}

}  // namespace mergerl
