#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

namespace mergerl {

// Dense row-major tensor of 64-bit floats. Rank is only ever 1 (vectors) or 2
// (matrices) in this project, but shape is kept general for checkpoints.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shp, std::vector<double> values);

    static Tensor zeros(std::initializer_list<std::size_t> shp);
    static Tensor zeros_like(const Tensor& other);
    static Tensor vector(std::vector<double> values);

    std::size_t size() const { return data.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return data[r * cols_unchecked() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols_unchecked() + c]; }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void fill(double value);
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }

private:
    std::size_t cols_unchecked() const { return shape.size() == 2 ? shape[1] : 1; }
};

bool operator==(const Tensor& a, const Tensor& b);

// Named parameter/gradient collections. std::map keeps iteration order
// deterministic, which Adam, checkpoints and the finite-difference oracle
// all rely on.
using NamedTensors = std::map<std::string, Tensor>;

// Mutable views into a model's parameters, in a stable order.
struct ParamRef {
    std::string name;
    Tensor* tensor;
};
using ParamRefs = std::vector<ParamRef>;

NamedTensors snapshot(const ParamRefs& refs);
void assign(const ParamRefs& refs, const NamedTensors& values);

// y = W x + b; W is rows x cols, x has cols entries.
void matvec(const Tensor& w, const double* x, const double* bias, double* y);
// dx += W^T dy
void matvec_transpose_acc(const Tensor& w, const double* dy, double* dx);
// dW += dy (x)^T  (outer product accumulate)
void outer_acc(Tensor& dw, const double* dy, const double* x);

}  // namespace mergerl
