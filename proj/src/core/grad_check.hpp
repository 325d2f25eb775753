#pragma once

#include <functional>
#include <string>

#include "core/tensor.hpp"

namespace mergerl {

// Central finite differences (f(p+h) - f(p-h)) / 2h over every scalar in the
// referenced parameters. f must be deterministic; the parameters are restored
// to their original values on return. Throws NumericError if f goes non-finite.
NamedTensors finite_diff_grad(const std::function<double()>& f, const ParamRefs& params,
                              double h);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
};

// Scaled elementwise error |a - n| / max(1, |a|, |n|); the floor makes the
// check an absolute one for tiny components where FD round-off dominates.
GradCheckResult compare_grads(const NamedTensors& analytic, const NamedTensors& numeric);

}  // namespace mergerl
