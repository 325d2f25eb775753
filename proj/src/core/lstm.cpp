#include "core/lstm.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/nn.hpp"

namespace mergerl {

LstmCellParams::LstmCellParams(std::size_t input, std::size_t hidden)
    : input_size(input), hidden_size(hidden) {
    const std::size_t cat = input + hidden;
    w_i = Tensor::zeros({hidden, cat});
    w_f = Tensor::zeros({hidden, cat});
    w_o = Tensor::zeros({hidden, cat});
    w_g = Tensor::zeros({hidden, cat});
    b_i = Tensor::zeros({hidden});
    b_f = Tensor::zeros({hidden});
    b_o = Tensor::zeros({hidden});
    b_g = Tensor::zeros({hidden});
}

void LstmCellParams::init_xavier(Rng& rng) {
    const std::size_t cat = input_size + hidden_size;
    const double limit = std::sqrt(6.0 / static_cast<double>(cat + hidden_size));
    for (Tensor* w : {&w_i, &w_f, &w_o, &w_g})
        for (double& v : w->data) v = rng.uniform(-limit, limit);
    b_i.fill(0.0);
    b_f.fill(1.0);
    b_o.fill(0.0);
    b_g.fill(0.0);
}

void LstmCellParams::validate() const {
    const std::size_t cat = input_size + hidden_size;
    for (const Tensor* w : {&w_i, &w_f, &w_o, &w_g})
        if (w->shape != std::vector<std::size_t>{hidden_size, cat})
            throw ShapeError("lstm: gate weight shape mismatch");
    for (const Tensor* b : {&b_i, &b_f, &b_o, &b_g})
        if (b->shape != std::vector<std::size_t>{hidden_size})
            throw ShapeError("lstm: gate bias shape mismatch");
}

ParamRefs LstmCellParams::param_refs(const std::string& prefix) {
    return {
        {prefix + "w_i", &w_i}, {prefix + "w_f", &w_f}, {prefix + "w_o", &w_o},
        {prefix + "w_g", &w_g}, {prefix + "b_i", &b_i}, {prefix + "b_f", &b_f},
        {prefix + "b_o", &b_o}, {prefix + "b_g", &b_g},
    };
}

NamedTensors LstmCellParams::zero_grads(const std::string& prefix) const {
    NamedTensors grads;
    grads[prefix + "w_i"] = Tensor::zeros_like(w_i);
    grads[prefix + "w_f"] = Tensor::zeros_like(w_f);
    grads[prefix + "w_o"] = Tensor::zeros_like(w_o);
    grads[prefix + "w_g"] = Tensor::zeros_like(w_g);
    grads[prefix + "b_i"] = Tensor::zeros_like(b_i);
    grads[prefix + "b_f"] = Tensor::zeros_like(b_f);
    grads[prefix + "b_o"] = Tensor::zeros_like(b_o);
    grads[prefix + "b_g"] = Tensor::zeros_like(b_g);
    return grads;
}

void lstm_forward(const LstmCellParams& p, const std::vector<double>& x,
                  const std::vector<double>& h_prev, const std::vector<double>& c_prev,
                  LstmCache& cache, std::vector<double>& h, std::vector<double>& c) {
    const std::size_t X = p.input_size;
    const std::size_t H = p.hidden_size;
    if (x.size() != X)
        throw ShapeError("lstm_forward: input size " + std::to_string(x.size()) + " != " +
                         std::to_string(X));
    if (h_prev.size() != H || c_prev.size() != H)
        throw ShapeError("lstm_forward: state size mismatch (expected H=" + std::to_string(H) + ")");

    cache.xh.resize(X + H);
    std::copy(x.begin(), x.end(), cache.xh.begin());
    std::copy(h_prev.begin(), h_prev.end(), cache.xh.begin() + static_cast<std::ptrdiff_t>(X));
    cache.c_prev = c_prev;

    cache.i.resize(H);
    cache.f.resize(H);
    cache.o.resize(H);
    cache.g.resize(H);
    cache.c.resize(H);
    cache.tanh_c.resize(H);

    std::vector<double> z(H);
    matvec(p.w_i, cache.xh.data(), p.b_i.data.data(), z.data());
    for (std::size_t k = 0; k < H; ++k) cache.i[k] = activate(Activation::Sigmoid, z[k]);
    matvec(p.w_f, cache.xh.data(), p.b_f.data.data(), z.data());
    for (std::size_t k = 0; k < H; ++k) cache.f[k] = activate(Activation::Sigmoid, z[k]);
    matvec(p.w_o, cache.xh.data(), p.b_o.data.data(), z.data());
    for (std::size_t k = 0; k < H; ++k) cache.o[k] = activate(Activation::Sigmoid, z[k]);
    matvec(p.w_g, cache.xh.data(), p.b_g.data.data(), z.data());
    for (std::size_t k = 0; k < H; ++k) cache.g[k] = std::tanh(z[k]);

    h.resize(H);
    c.resize(H);
    for (std::size_t k = 0; k < H; ++k) {
        cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];
        cache.tanh_c[k] = std::tanh(cache.c[k]);
        c[k] = cache.c[k];
        h[k] = cache.o[k] * cache.tanh_c[k];
    }
}

void lstm_backward(const LstmCellParams& p, const LstmCache& cache,
                   const std::vector<double>& dh, const std::vector<double>& dc,
                   LstmGrads& grads, const std::string& prefix) {
    const std::size_t X = p.input_size;
    const std::size_t H = p.hidden_size;
    if (cache.xh.size() != X + H || cache.i.size() != H)
        throw ContractError("lstm_backward: cache does not match cell shapes");
    if (dh.size() != H || dc.size() != H)
        throw ShapeError("lstm_backward: dh/dc size mismatch");

    if (grads.params.empty()) grads.params = p.zero_grads(prefix);

    std::vector<double> dz_i(H), dz_f(H), dz_o(H), dz_g(H);
    grads.dc_prev.assign(H, 0.0);
    for (std::size_t k = 0; k < H; ++k) {
        const double i = cache.i[k], f = cache.f[k], o = cache.o[k], g = cache.g[k];
        const double tc = cache.tanh_c[k];
        const double d_o = dh[k] * tc;
        const double d_c = dc[k] + dh[k] * o * (1.0 - tc * tc);
        const double d_i = d_c * g;
        const double d_f = d_c * cache.c_prev[k];
        const double d_g = d_c * i;
        grads.dc_prev[k] = d_c * f;
        dz_i[k] = d_i * i * (1.0 - i);
        dz_f[k] = d_f * f * (1.0 - f);
        dz_o[k] = d_o * o * (1.0 - o);
        dz_g[k] = d_g * (1.0 - g * g);
    }

    outer_acc(grads.params[prefix + "w_i"], dz_i.data(), cache.xh.data());
    outer_acc(grads.params[prefix + "w_f"], dz_f.data(), cache.xh.data());
    outer_acc(grads.params[prefix + "w_o"], dz_o.data(), cache.xh.data());
    outer_acc(grads.params[prefix + "w_g"], dz_g.data(), cache.xh.data());
    for (std::size_t k = 0; k < H; ++k) {
        grads.params[prefix + "b_i"][k] += dz_i[k];
        grads.params[prefix + "b_f"][k] += dz_f[k];
        grads.params[prefix + "b_o"][k] += dz_o[k];
        grads.params[prefix + "b_g"][k] += dz_g[k];
    }

    std::vector<double> dxh(X + H, 0.0);
    matvec_transpose_acc(p.w_i, dz_i.data(), dxh.data());
    matvec_transpose_acc(p.w_f, dz_f.data(), dxh.data());
    matvec_transpose_acc(p.w_o, dz_o.data(), dxh.data());
    matvec_transpose_acc(p.w_g, dz_g.data(), dxh.data());
    grads.dx.assign(dxh.begin(), dxh.begin() + static_cast<std::ptrdiff_t>(X));
    grads.dh_prev.assign(dxh.begin() + static_cast<std::ptrdiff_t>(X), dxh.end());
}

}  // namespace mergerl
