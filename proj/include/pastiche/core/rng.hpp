#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "pastiche/core/errors.hpp"

namespace pastiche {

// Deterministic random source. All sampling helpers are implemented on top
// of the raw 64-bit stream so results do not depend on standard-library
// distribution internals. State round-trips exactly through serialize().
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; consumes exactly two draws, keeps no
    // spare so the consumed stream length is predictable.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Uniform integer in [0, n). Lemire's unbiased bounded method.
    int64_t below(int64_t n) {
        if (n <= 0) throw ValueError("Rng::below requires n > 0");
        const uint64_t bound = static_cast<uint64_t>(n);
        uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            const uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<int64_t>(m >> 64);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        if (is.fail()) throw IoError("invalid RNG state string");
    }

    // Independent stream for a (seed, step) pair; the step-k draw sequence
    // is a pure function of both, independent of any other step.
    static Rng for_step(uint64_t seed, uint64_t step) {
        return Rng(mix(mix(seed) ^ mix(step + 0x9e3779b97f4a7c15ull)));
    }

    static uint64_t mix(uint64_t x) { // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace pastiche
