#pragma once

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace mergerl {

// Standard LSTM cell:
//   i,f,o = sigmoid(W_{i,f,o} [x; h_prev] + b_{i,f,o})
//   g     = tanh(W_g [x; h_prev] + b_g)
//   c     = f . c_prev + i . g
//   h     = o . tanh(c)
struct LstmCellParams {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Tensor w_i, w_f, w_o, w_g;  // each H x (X + H)
    Tensor b_i, b_f, b_o, b_g;  // each H

    LstmCellParams() = default;
    LstmCellParams(std::size_t input, std::size_t hidden);

    // Xavier gate weights; forget-gate bias starts at 1.0, others at 0.
    void init_xavier(Rng& rng);
    void validate() const;

    ParamRefs param_refs(const std::string& prefix = "");
    NamedTensors zero_grads(const std::string& prefix = "") const;
};

struct LstmCache {
    std::vector<double> xh;      // [x; h_prev], X + H
    std::vector<double> c_prev;  // H
    std::vector<double> i, f, o, g;
    std::vector<double> c, tanh_c;
};

struct LstmGrads {
    NamedTensors params;         // keyed like param_refs(prefix)
    std::vector<double> dx;      // X
    std::vector<double> dh_prev; // H
    std::vector<double> dc_prev; // H
};

// h and c must each hold hidden_size entries on return. Every component of h
// lies strictly inside (-1, 1).
void lstm_forward(const LstmCellParams& p, const std::vector<double>& x,
                  const std::vector<double>& h_prev, const std::vector<double>& c_prev,
                  LstmCache& cache, std::vector<double>& h, std::vector<double>& c);

// dh/dc are gradients at this step's h and c outputs. Parameter gradients
// accumulate into grads.params so that calls compose across time steps (BPTT).
void lstm_backward(const LstmCellParams& p, const LstmCache& cache,
                   const std::vector<double>& dh, const std::vector<double>& dc,
                   LstmGrads& grads, const std::string& prefix = "");

}  // namespace mergerl
