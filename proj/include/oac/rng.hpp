#pragma once

#include <complex>
#include <cmath>
#include <cstdint>
#include <utility>

namespace oac {

/// Deterministic random stream (xoshiro256++ core, splitmix64 seeding).
///
/// The library never uses <random> distributions: every draw below is a
/// fixed arithmetic recipe on top of next(), so traces replay bit-identically
/// across runs and platforms. Consumption counts per call:
///   uniform01 / uniform / bernoulli      1 word
///   gaussian / gaussian_pair             2 words (Box-Muller)
///   complex_gaussian                     2 words
///
/// Per-trial streams are derived from (master seed, trial index), so trial t
/// is unaffected by how many trials run or in which order.
class Stream {
public:
    explicit Stream(std::uint64_t seed) { seed_state(seed); }

    static Stream for_trial(std::uint64_t master_seed, std::uint64_t trial_index) {
        Stream s(master_seed ^ (0x9e3779b97f4a7c15ULL * (trial_index + 1)));
        return s;
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Independent standard normal pair via Box-Muller.
    std::pair<double, double> gaussian_pair() {
        const double u1 = 1.0 - uniform01(); // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * pi * u2;
        return {r * std::cos(t), r * std::sin(t)};
    }

    double gaussian() { return gaussian_pair().first; }

    /// Circularly symmetric complex Gaussian with E[|z|^2] = variance
    /// (real and imaginary parts are N(0, variance/2)).
    std::complex<double> complex_gaussian(double variance) {
        const auto [a, b] = gaussian_pair();
        const double s = std::sqrt(0.5 * variance);
        return {s * a, s * b};
    }

private:
    static constexpr double pi = 3.141592653589793238462643383279502884;

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    void seed_state(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the xoshiro state
        std::uint64_t z = seed;
        bool all_zero = true;
        for (auto& w : s_) {
            z += 0x9e3779b97f4a7c15ULL;
            std::uint64_t x = z;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            w = x ^ (x >> 31);
            all_zero = all_zero && w == 0;
        }
        if (all_zero) s_[0] = 1; // xoshiro state must not be all zero
    }

    std::uint64_t s_[4];
};

} // namespace oac
