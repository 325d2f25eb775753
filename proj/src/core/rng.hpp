#pragma once

#include <cmath>
#include <cstdint>

namespace mergerl {

// xoshiro256++ seeded through splitmix64. All randomness in the project flows
// through this generator so that runs are reproducible bit-for-bit from a
// 64-bit seed, independent of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; draws two uniforms per call, no cached spare.
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // splitmix64 step: advances `state` and returns the next output.
    static std::uint64_t splitmix64(std::uint64_t& state) {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
};

// Derives an independent stream seed from a base seed and a salt. Used to give
// each subsystem (env episodes, action noise, replay sampling, init) its own
// decorrelated stream.
inline std::uint64_t sub_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t s = base ^ (0xD1B54A32D192ED03ull * (salt + 1));
    std::uint64_t first = Rng::splitmix64(s);
    (void)first;
    return Rng::splitmix64(s);
}

}  // namespace mergerl
