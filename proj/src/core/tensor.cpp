#include "core/tensor.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace mergerl {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shp, std::vector<double> values)
    : shape(std::move(shp)), data(std::move(values)) {
    if (shape_product(shape) != data.size())
        throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                         " does not match shape product " + std::to_string(shape_product(shape)));
}

Tensor Tensor::zeros(std::initializer_list<std::size_t> shp) {
    Tensor t;
    t.shape.assign(shp);
    t.data.assign(shape_product(t.shape), 0.0);
    return t;
}

Tensor Tensor::zeros_like(const Tensor& other) {
    Tensor t;
    t.shape = other.shape;
    t.data.assign(other.data.size(), 0.0);
    return t;
}

Tensor Tensor::vector(std::vector<double> values) {
    Tensor t;
    t.shape = {values.size()};
    t.data = std::move(values);
    return t;
}

std::size_t Tensor::rows() const {
    if (shape.empty()) throw ShapeError("tensor: rows() on rank-0 tensor");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (shape.size() != 2) throw ShapeError("tensor: cols() on non-matrix tensor");
    return shape[1];
}

void Tensor::fill(double value) {
    for (double& v : data) v = value;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
}

NamedTensors snapshot(const ParamRefs& refs) {
    NamedTensors out;
    for (const auto& r : refs) out[r.name] = *r.tensor;
    return out;
}

void assign(const ParamRefs& refs, const NamedTensors& values) {
    for (const auto& r : refs) {
        auto it = values.find(r.name);
        if (it == values.end()) throw ContractError("assign: missing tensor " + r.name);
        if (!it->second.same_shape(*r.tensor))
            throw ShapeError("assign: shape mismatch for " + r.name);
        *r.tensor = it->second;
    }
}

void matvec(const Tensor& w, const double* x, const double* bias, double* y) {
    const std::size_t rows = w.shape[0];
    const std::size_t cols = w.shape[1];
    const double* wd = w.data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = wd + r * cols;
        double acc = bias ? bias[r] : 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void matvec_transpose_acc(const Tensor& w, const double* dy, double* dx) {
    const std::size_t rows = w.shape[0];
    const std::size_t cols = w.shape[1];
    const double* wd = w.data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = wd + r * cols;
        const double g = dy[r];
        for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * g;
    }
}

void outer_acc(Tensor& dw, const double* dy, const double* x) {
    const std::size_t rows = dw.shape[0];
    const std::size_t cols = dw.shape[1];
    double* wd = dw.data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = wd + r * cols;
        const double g = dy[r];
        for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
    }
}

}  // namespace mergerl
