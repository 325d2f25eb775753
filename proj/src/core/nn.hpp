#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace mergerl {

enum class Activation { Linear, Tanh, Relu, Sigmoid, Softplus };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::Linear: return z;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Softplus:
            // Stable for large |z|: softplus(z) = max(z,0) + log1p(exp(-|z|))
            return (z > 0.0 ? z : 0.0) + std::log1p(std::exp(-std::fabs(z)));
    }
    return z;
}

// Derivative with respect to the pre-activation z.
inline double activate_grad(Activation a, double z) {
    switch (a) {
        case Activation::Linear: return 1.0;
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::Softplus: return 1.0 / (1.0 + std::exp(-z));
    }
    return 1.0;
}

struct DenseLayer {
    Tensor weights;  // out x in
    Tensor bias;     // out
    Activation activation = Activation::Linear;

    DenseLayer() = default;
    DenseLayer(std::size_t out, std::size_t in, Activation act);

    std::size_t in_size() const { return weights.shape[1]; }
    std::size_t out_size() const { return weights.shape[0]; }

    // Xavier-uniform fan-avg weights, zero bias.
    void init_xavier(Rng& rng);
};

struct DenseCache {
    std::vector<double> input;
    std::vector<double> pre;  // z = Wx + b
};

struct DenseGrads {
    Tensor dw;
    Tensor db;
};

void dense_forward(const DenseLayer& layer, const double* x, DenseCache& cache, double* y);
// dy is the gradient at the layer output (post-activation); accumulates into
// grads, writes dx (input gradient).
void dense_backward(const DenseLayer& layer, const DenseCache& cache, const double* dy,
                    DenseGrads& grads, double* dx);

// Ordered stack of dense layers; adjacent dimensions must chain.
struct Mlp {
    std::vector<DenseLayer> layers;

    Mlp() = default;
    // dims = {in, h1, ..., out}; acts has dims.size()-1 entries.
    Mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts);

    std::size_t in_size() const { return layers.front().in_size(); }
    std::size_t out_size() const { return layers.back().out_size(); }

    void init_xavier(Rng& rng);
    void validate() const;  // throws ShapeError naming the offending layer

    // Parameter names are "layer<i>/w" and "layer<i>/b", optionally prefixed.
    ParamRefs param_refs(const std::string& prefix = "");
    NamedTensors zero_grads(const std::string& prefix = "") const;
};

struct MlpCache {
    std::vector<DenseCache> layers;
};

// y must hold out_size() entries. Throws ShapeError on a size mismatch,
// naming the offending layer.
void mlp_forward(const Mlp& mlp, const std::vector<double>& x, MlpCache& cache,
                 std::vector<double>& y);

// Accumulates parameter gradients into grads (keys from param_refs with the
// same prefix); returns dx. The cache must come from mlp_forward on this mlp.
std::vector<double> mlp_backward(const Mlp& mlp, const MlpCache& cache,
                                 const std::vector<double>& dy, NamedTensors& grads,
                                 const std::string& prefix = "");

}  // namespace mergerl
