#include "core/nn.hpp"

#include "core/errors.hpp"

namespace mergerl {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softplus: return "softplus";
    }
    return "linear";
}

Activation activation_from_name(const std::string& name) {
    if (name == "linear") return Activation::Linear;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softplus") return Activation::Softplus;
    throw ConfigError("unknown activation: " + name);
}

DenseLayer::DenseLayer(std::size_t out, std::size_t in, Activation act) : activation(act) {
    weights = Tensor::zeros({out, in});
    bias = Tensor::zeros({out});
}

void DenseLayer::init_xavier(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_size() + out_size()));
    for (double& w : weights.data) w = rng.uniform(-limit, limit);
    bias.fill(0.0);
}

void dense_forward(const DenseLayer& layer, const double* x, DenseCache& cache, double* y) {
    const std::size_t in = layer.in_size();
    const std::size_t out = layer.out_size();
    cache.input.assign(x, x + in);
    cache.pre.resize(out);
    matvec(layer.weights, x, layer.bias.data.data(), cache.pre.data());
    for (std::size_t i = 0; i < out; ++i) y[i] = activate(layer.activation, cache.pre[i]);
}

void dense_backward(const DenseLayer& layer, const DenseCache& cache, const double* dy,
                    DenseGrads& grads, double* dx) {
    const std::size_t in = layer.in_size();
    const std::size_t out = layer.out_size();
    if (cache.input.size() != in || cache.pre.size() != out)
        throw ContractError("dense_backward: cache does not match layer shapes");

    std::vector<double> dz(out);
    for (std::size_t i = 0; i < out; ++i)
        dz[i] = dy[i] * activate_grad(layer.activation, cache.pre[i]);

    outer_acc(grads.dw, dz.data(), cache.input.data());
    for (std::size_t i = 0; i < out; ++i) grads.db[i] += dz[i];

    for (std::size_t c = 0; c < in; ++c) dx[c] = 0.0;
    matvec_transpose_acc(layer.weights, dz.data(), dx);
}

Mlp::Mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw ShapeError("mlp: dims/activations mismatch");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        layers.emplace_back(dims[i + 1], dims[i], acts[i]);
}

void Mlp::init_xavier(Rng& rng) {
    for (auto& layer : layers) layer.init_xavier(rng);
}

void Mlp::validate() const {
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        if (layers[i].out_size() != layers[i + 1].in_size())
            throw ShapeError("mlp: layer " + std::to_string(i) + " output size " +
                             std::to_string(layers[i].out_size()) + " != layer " +
                             std::to_string(i + 1) + " input size " +
                             std::to_string(layers[i + 1].in_size()));
    }
}

ParamRefs Mlp::param_refs(const std::string& prefix) {
    ParamRefs refs;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        refs.push_back({prefix + "layer" + std::to_string(i) + "/w", &layers[i].weights});
        refs.push_back({prefix + "layer" + std::to_string(i) + "/b", &layers[i].bias});
    }
    return refs;
}

NamedTensors Mlp::zero_grads(const std::string& prefix) const {
    NamedTensors grads;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        grads[prefix + "layer" + std::to_string(i) + "/w"] = Tensor::zeros_like(layers[i].weights);
        grads[prefix + "layer" + std::to_string(i) + "/b"] = Tensor::zeros_like(layers[i].bias);
    }
    return grads;
}

void mlp_forward(const Mlp& mlp, const std::vector<double>& x, MlpCache& cache,
                 std::vector<double>& y) {
    if (mlp.layers.empty()) throw ShapeError("mlp_forward: empty mlp");
    if (x.size() != mlp.in_size())
        throw ShapeError("mlp_forward: layer 0 expects input size " +
                         std::to_string(mlp.in_size()) + ", got " + std::to_string(x.size()));
    cache.layers.resize(mlp.layers.size());
    std::vector<double> cur = x;
    std::vector<double> next;
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        const auto& layer = mlp.layers[i];
        if (cur.size() != layer.in_size())
            throw ShapeError("mlp_forward: layer " + std::to_string(i) + " expects input size " +
                             std::to_string(layer.in_size()) + ", got " + std::to_string(cur.size()));
        next.resize(layer.out_size());
        dense_forward(layer, cur.data(), cache.layers[i], next.data());
        cur.swap(next);
    }
    y = std::move(cur);
}

std::vector<double> mlp_backward(const Mlp& mlp, const MlpCache& cache,
                                 const std::vector<double>& dy, NamedTensors& grads,
                                 const std::string& prefix) {
    if (cache.layers.size() != mlp.layers.size())
        throw ContractError("mlp_backward: cache layer count does not match mlp");
    if (dy.size() != mlp.out_size())
        throw ShapeError("mlp_backward: dy size " + std::to_string(dy.size()) +
                         " != output size " + std::to_string(mlp.out_size()));

    std::vector<double> cur = dy;
    std::vector<double> dx;
    for (std::size_t i = mlp.layers.size(); i-- > 0;) {
        const auto& layer = mlp.layers[i];
        const std::string base = prefix + "layer" + std::to_string(i);
        DenseGrads g{std::move(grads[base + "/w"]), std::move(grads[base + "/b"])};
        if (g.dw.data.empty()) g.dw = Tensor::zeros_like(layer.weights);
        if (g.db.data.empty()) g.db = Tensor::zeros_like(layer.bias);
        dx.assign(layer.in_size(), 0.0);
        dense_backward(layer, cache.layers[i], cur.data(), g, dx.data());
        grads[base + "/w"] = std::move(g.dw);
        grads[base + "/b"] = std::move(g.db);
        cur.swap(dx);
    }
    return cur;
}

}  // namespace mergerl
