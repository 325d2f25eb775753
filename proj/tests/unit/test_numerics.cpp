#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/checkpoint.hpp"
#include "core/errors.hpp"
#include "core/grad_check.hpp"
#include "core/lstm.hpp"
#include "core/nn.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace mergerl;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("splitmix64 matches the published reference sequence") {
    std::uint64_t s = 0;
    CHECK(Rng::splitmix64(s) == 0xE220A8397B1DCDAFull);
    CHECK(Rng::splitmix64(s) == 0x6E789E6AA1B965F4ull);
    CHECK(Rng::splitmix64(s) == 0x06C45D188009454Full);
}

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i) differs |= (a2.next_u64() != c.next_u64());
    CHECK(differs);
}

TEST_CASE("uniform01 lies in [0,1) and uniform respects its range") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.uniform(-2.5, 3.5);
        CHECK(v >= -2.5);
        CHECK(v < 3.5);
    }
}

TEST_CASE("gaussian moments are roughly right") {
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian(1.0, 2.0);
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("sub_seed decorrelates streams") {
    CHECK(sub_seed(1, 0) != sub_seed(1, 1));
    CHECK(sub_seed(1, 0) != sub_seed(2, 0));
    CHECK(sub_seed(1, 5) == sub_seed(1, 5));
}

TEST_CASE("tensor shape accounting and equality") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    t.at(1, 2) = 4.5;
    CHECK(t[5] == 4.5);
    Tensor u = Tensor::zeros_like(t);
    CHECK(u.same_shape(t));
    CHECK_FALSE(t == u);
    u.at(1, 2) = 4.5;
    CHECK(t == u);
    CHECK(t.all_finite());
    t[0] = std::nan("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("identity linear layer passes input through") {
    DenseLayer layer(2, 2, Activation::Linear);
    layer.weights.at(0, 0) = 1.0;
    layer.weights.at(1, 1) = 1.0;
    DenseCache cache;
    double y[2];
    const double x[2] = {3.0, -1.0};
    dense_forward(layer, x, cache, y);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == -1.0);
}

TEST_CASE("zero-weight tanh layer maps everything to zero") {
    DenseLayer layer(4, 3, Activation::Tanh);
    DenseCache cache;
    double y[4];
    const double x[3] = {5.0, -2.0, 0.25};
    dense_forward(layer, x, cache, y);
    for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("mlp forward matches an independent re-evaluation") {
    Rng rng(1234);
    Mlp mlp({9, 16, 1}, {Activation::Tanh, Activation::Linear});
    mlp.init_xavier(rng);

    std::vector<double> x(9);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);

    MlpCache cache;
    std::vector<double> y;
    mlp_forward(mlp, x, cache, y);
    REQUIRE(y.size() == 1);

    // Straightforward re-evaluation of the layer equations.
    std::vector<double> h(16);
    for (int i = 0; i < 16; ++i) {
        double z = mlp.layers[0].bias[i];
        for (int j = 0; j < 9; ++j) z += mlp.layers[0].weights.at(i, j) * x[j];
        h[i] = std::tanh(z);
    }
    double out = mlp.layers[1].bias[0];
    for (int i = 0; i < 16; ++i) out += mlp.layers[1].weights.at(0, i) * h[i];

    CHECK(y[0] == doctest::Approx(out).epsilon(1e-12));
}

TEST_CASE("mlp rejects mismatched input size") {
    Mlp mlp({4, 3}, {Activation::Linear});
    MlpCache cache;
    std::vector<double> y;
    std::vector<double> wrong(5, 0.0);
    CHECK_THROWS_AS(mlp_forward(mlp, wrong, cache, y), ShapeError);
}

TEST_CASE("mlp validate names the offending layer on a dimension break") {
    Mlp mlp({4, 3}, {Activation::Linear});
    Mlp tail({5, 2}, {Activation::Linear});
    mlp.layers.push_back(tail.layers[0]);
    CHECK_THROWS_AS(mlp.validate(), ShapeError);
}

TEST_CASE("linear layer backward has the textbook gradient") {
    DenseLayer layer(2, 3, Activation::Linear);
    Rng rng(5);
    layer.init_xavier(rng);
    const double x[3] = {0.5, -1.5, 2.0};
    DenseCache cache;
    double y[2];
    dense_forward(layer, x, cache, y);

    DenseGrads grads;
    grads.dw = Tensor::zeros({2, 3});
    grads.db = Tensor::zeros({2});
    const double dy[2] = {1.0, 0.0};  // e_1
    double dx[3];
    dense_backward(layer, cache, dy, grads, dx);

    CHECK(grads.db[0] == 1.0);
    CHECK(grads.db[1] == 0.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(grads.dw.at(0, j) == x[j]);
        CHECK(grads.dw.at(1, j) == 0.0);
        CHECK(dx[j] == layer.weights.at(0, j));
    }
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
    Rng rng(6);
    Mlp mlp({3, 5, 2}, {Activation::Tanh, Activation::Linear});
    mlp.init_xavier(rng);
    MlpCache cache;
    std::vector<double> y;
    mlp_forward(mlp, {0.1, 0.2, 0.3}, cache, y);
    NamedTensors grads;
    const std::vector<double> dx = mlp_backward(mlp, cache, {0.0, 0.0}, grads);
    for (const auto& [name, g] : grads)
        for (double v : g.data) CHECK(v == 0.0);
    for (double v : dx) CHECK(v == 0.0);
}

TEST_CASE("mlp gradients match central finite differences") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        Mlp mlp({9, 16, 1}, {Activation::Tanh, Activation::Linear});
        mlp.init_xavier(rng);
        std::vector<double> x(9);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);

        MlpCache cache;
        std::vector<double> y;
        mlp_forward(mlp, x, cache, y);
        NamedTensors analytic;
        mlp_backward(mlp, cache, {1.0}, analytic);

        const ParamRefs refs = mlp.param_refs();
        const NamedTensors numeric = finite_diff_grad(
            [&]() {
                MlpCache c2;
                std::vector<double> y2;
                mlp_forward(mlp, x, c2, y2);
                return y2[0];
            },
            refs, 1e-5);
        const GradCheckResult r = compare_grads(analytic, numeric);
        CHECK(r.max_rel_error <= 1e-6);
    }
}

TEST_CASE("lstm zero-parameter gates sit at one half") {
    LstmCellParams p(2, 3);  // constructor leaves all weights and biases at zero
    LstmCache cache;
    std::vector<double> h, c;
    lstm_forward(p, {0.7, -0.3}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, cache, h, c);
    for (int i = 0; i < 3; ++i) {
        CHECK(cache.i[i] == 0.5);
        CHECK(cache.f[i] == 0.5);
        CHECK(cache.o[i] == 0.5);
        CHECK(cache.g[i] == 0.0);
        CHECK(c[i] == 0.0);
        CHECK(h[i] == 0.0);
    }
}

TEST_CASE("lstm zero parameters with unit cell memory") {
    LstmCellParams p(1, 1);
    LstmCache cache;
    std::vector<double> h, c;
    lstm_forward(p, {0.0}, {0.0}, {1.0}, cache, h, c);
    CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-15));
    // h = 0.5 * tanh(0.5)
    CHECK(h[0] == doctest::Approx(0.23105857863000487).epsilon(1e-14));
}

TEST_CASE("lstm forward matches an independent gate evaluation") {
    Rng rng(99);
    LstmCellParams p(3, 4);
    p.init_xavier(rng);
    std::vector<double> x = {0.2, -0.4, 0.9};
    std::vector<double> h_prev = {0.1, -0.2, 0.05, 0.3};
    std::vector<double> c_prev = {0.5, 0.0, -0.7, 0.25};

    LstmCache cache;
    std::vector<double> h, c;
    lstm_forward(p, x, h_prev, c_prev, cache, h, c);

    std::vector<double> xh(x);
    xh.insert(xh.end(), h_prev.begin(), h_prev.end());
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    for (int k = 0; k < 4; ++k) {
        double zi = p.b_i[k], zf = p.b_f[k], zo = p.b_o[k], zg = p.b_g[k];
        for (std::size_t j = 0; j < xh.size(); ++j) {
            zi += p.w_i.at(k, j) * xh[j];
            zf += p.w_f.at(k, j) * xh[j];
            zo += p.w_o.at(k, j) * xh[j];
            zg += p.w_g.at(k, j) * xh[j];
        }
        const double ck = sig(zf) * c_prev[k] + sig(zi) * std::tanh(zg);
        const double hk = sig(zo) * std::tanh(ck);
        CHECK(c[k] == doctest::Approx(ck).epsilon(1e-12));
        CHECK(h[k] == doctest::Approx(hk).epsilon(1e-12));
        CHECK(std::fabs(h[k]) < 1.0);
    }
}

TEST_CASE("lstm backward with zero incoming gradients is zero") {
    Rng rng(3);
    LstmCellParams p(2, 3);
    p.init_xavier(rng);
    LstmCache cache;
    std::vector<double> h, c;
    lstm_forward(p, {0.3, 0.4}, {0.0, 0.1, -0.1}, {0.2, 0.0, 0.0}, cache, h, c);
    LstmGrads grads;
    grads.params = p.zero_grads();
    lstm_backward(p, cache, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, grads);
    for (const auto& [name, g] : grads.params)
        for (double v : g.data) CHECK(v == 0.0);
    for (double v : grads.dx) CHECK(v == 0.0);
    for (double v : grads.dh_prev) CHECK(v == 0.0);
    for (double v : grads.dc_prev) CHECK(v == 0.0);
}

TEST_CASE("single-step lstm gradients match finite differences") {
    for (std::uint64_t seed : {10ull, 11ull, 12ull}) {
        Rng rng(seed);
        LstmCellParams p(3, 4);
        p.init_xavier(rng);
        std::vector<double> x(3), h0(4, 0.0), c0(4, 0.0);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);

        // Scalar loss: sum of h components.
        auto loss = [&]() {
            LstmCache cache;
            std::vector<double> h, c;
            lstm_forward(p, x, h0, c0, cache, h, c);
            double l = 0.0;
            for (double v : h) l += v;
            return l;
        };

        LstmCache cache;
        std::vector<double> h, c;
        lstm_forward(p, x, h0, c0, cache, h, c);
        LstmGrads grads;
        grads.params = p.zero_grads();
        lstm_backward(p, cache, {1.0, 1.0, 1.0, 1.0}, {0.0, 0.0, 0.0, 0.0}, grads);

        const NamedTensors numeric = finite_diff_grad(loss, p.param_refs(), 1e-5);
        const GradCheckResult r = compare_grads(grads.params, numeric);
        CHECK(r.max_rel_error <= 1e-6);
    }
}

TEST_CASE("unrolled lstm sequence gradients match finite differences") {
    Rng rng(21);
    LstmCellParams p(2, 3);
    p.init_xavier(rng);
    std::vector<std::vector<double>> xs(8, std::vector<double>(2));
    for (auto& x : xs)
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);

    auto loss = [&]() {
        std::vector<double> h(3, 0.0), c(3, 0.0);
        double l = 0.0;
        for (const auto& x : xs) {
            LstmCache cache;
            std::vector<double> hn, cn;
            lstm_forward(p, x, h, c, cache, hn, cn);
            h = hn;
            c = cn;
            for (double v : h) l += v * v;
        }
        return l;
    };

    // Forward storing caches, then reverse-mode through time.
    std::vector<LstmCache> caches(8);
    std::vector<std::vector<double>> hs, cs;
    std::vector<double> h(3, 0.0), c(3, 0.0);
    for (int t = 0; t < 8; ++t) {
        std::vector<double> hn, cn;
        lstm_forward(p, xs[t], h, c, caches[t], hn, cn);
        h = hn;
        c = cn;
        hs.push_back(h);
        cs.push_back(c);
    }
    NamedTensors analytic = p.zero_grads();
    std::vector<double> dh(3, 0.0), dc(3, 0.0);
    for (int t = 7; t >= 0; --t) {
        for (int k = 0; k < 3; ++k) dh[k] += 2.0 * hs[t][k];
        LstmGrads grads;
        grads.params = std::move(analytic);
        lstm_backward(p, caches[t], dh, dc, grads);
        analytic = std::move(grads.params);
        dh = grads.dh_prev;
        dc = grads.dc_prev;
    }

    const NamedTensors numeric = finite_diff_grad(loss, p.param_refs(), 1e-5);
    const GradCheckResult r = compare_grads(analytic, numeric);
    CHECK(r.max_rel_error <= 1e-5);
}

TEST_CASE("adam with zero gradients leaves parameters untouched") {
    Tensor w = Tensor::vector({1.0, -2.0, 3.0});
    ParamRefs refs = {{"w", &w}};
    AdamState state = AdamState::init(refs, {});
    NamedTensors grads;
    grads["w"] = Tensor::zeros({3});
    adam_step(refs, grads, state);
    CHECK(state.step == 1);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == -2.0);
    CHECK(w[2] == 3.0);
}

TEST_CASE("adam first step moves by about alpha against the gradient") {
    Tensor w = Tensor::vector({1.0});
    ParamRefs refs = {{"w", &w}};
    AdamConfig cfg;
    cfg.alpha = 0.1;
    AdamState state = AdamState::init(refs, cfg);
    NamedTensors grads;
    grads["w"] = Tensor::vector({1.0});
    adam_step(refs, grads, state);
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("adam converges on a quadratic bowl") {
    Tensor w = Tensor::vector({0.0});
    ParamRefs refs = {{"w", &w}};
    AdamConfig cfg;
    cfg.alpha = 0.1;
    AdamState state = AdamState::init(refs, cfg);
    for (int i = 0; i < 500; ++i) {
        NamedTensors grads;
        grads["w"] = Tensor::vector({2.0 * (w[0] - 3.0)});
        adam_step(refs, grads, state);
    }
    CHECK(std::fabs(w[0] - 3.0) < 0.01);
}

TEST_CASE("adam rejects non-finite gradients by tensor name") {
    Tensor w = Tensor::vector({1.0});
    ParamRefs refs = {{"w", &w}};
    AdamState state = AdamState::init(refs, {});
    NamedTensors grads;
    grads["w"] = Tensor::vector({std::nan("")});
    try {
        adam_step(refs, grads, state);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("w") != std::string::npos);
    }
}

TEST_CASE("adam treats missing gradient entries as zero") {
    Tensor w = Tensor::vector({1.0});
    Tensor u = Tensor::vector({2.0});
    ParamRefs refs = {{"w", &w}, {"u", &u}};
    AdamState state = AdamState::init(refs, {});
    NamedTensors grads;
    grads["w"] = Tensor::vector({1.0});
    adam_step(refs, grads, state);
    CHECK(w[0] != 1.0);
    CHECK(u[0] == 2.0);
}

TEST_CASE("finite differences recover the derivative of w squared") {
    Tensor w = Tensor::vector({3.0});
    ParamRefs refs = {{"w", &w}};
    const NamedTensors g = finite_diff_grad([&]() { return w[0] * w[0]; }, refs, 1e-5);
    CHECK(g.at("w")[0] == doctest::Approx(6.0).epsilon(1e-8));
    CHECK(w[0] == 3.0);  // restored
}

TEST_CASE("finite differences of a constant are zero") {
    Tensor w = Tensor::vector({1.0, 2.0});
    ParamRefs refs = {{"w", &w}};
    const NamedTensors g = finite_diff_grad([]() { return 7.5; }, refs, 1e-5);
    for (double v : g.at("w").data) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("empty checkpoint round-trips") {
    Checkpoint ck;
    const Checkpoint back = checkpoint_from_json(checkpoint_to_json(ck));
    CHECK(ck == back);
}

TEST_CASE("random checkpoint round-trips bit-exactly") {
    Rng rng(8);
    Checkpoint ck;
    ck.metadata["kind"] = "test";
    ck.metadata["note"] = "quotes \" and slashes \\ survive";
    for (int i = 0; i < 10; ++i) {
        Tensor t = Tensor::zeros({3, 4});
        for (auto& v : t.data) v = rng.gaussian(0.0, 10.0);
        ck.tensors["tensor" + std::to_string(i)] = t;
    }
    const std::string path = temp_path("mergerl_ck_roundtrip.json");
    save_checkpoint(ck, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(ck == back);
    std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoint file is a parse error") {
    Checkpoint ck;
    ck.tensors["w"] = Tensor::vector({1.0, 2.0});
    const std::string path = temp_path("mergerl_ck_trunc.json");
    save_checkpoint(ck, path);
    std::string text;
    {
        std::ifstream in(path);
        std::getline(in, text, '\0');
    }
    {
        std::ofstream out(path, std::ios::trunc);
        out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("missing checkpoint file is an io error") {
    CHECK_THROWS_AS(load_checkpoint(temp_path("mergerl_no_such_ck.json")), IoError);
}

TEST_CASE("checkpoint version mismatch is rejected") {
    CHECK_THROWS_AS(
        checkpoint_from_json(R"({"version": 2, "tensors": {}, "metadata": {}})"),
        ParseError);
}

TEST_CASE("checkpoint with wrong tensor length is rejected") {
    CHECK_THROWS_AS(checkpoint_from_json(
                        R"({"version": 1,
                            "tensors": {"w": {"shape": [3], "data": [1.0, 2.0]}},
                            "metadata": {}})"),
                    ParseError);
}

TEST_CASE("snapshot and assign round-trip parameters") {
    Tensor a = Tensor::vector({1.0, 2.0});
    Tensor b = Tensor::zeros({2, 2});
    ParamRefs refs = {{"a", &a}, {"b", &b}};
    NamedTensors saved = snapshot(refs);
    a[0] = 99.0;
    b.at(1, 1) = -5.0;
    assign(refs, saved);
    CHECK(a[0] == 1.0);
    CHECK(b.at(1, 1) == 0.0);
}
