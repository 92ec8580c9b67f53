#pragma once

#include <cmath>
#include <cstdint>

namespace wegpipe {

// Deterministic RNG with self-contained distributions. std:: distributions
// are implementation-defined, which would break byte-identical outputs
// across toolchains, so everything downstream of a seed goes through this.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate small consecutive seeds
        next();
        next();
    }

    // splitmix64
    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int64_t uniform_int(int64_t n) {
        return static_cast<int64_t>(next() % static_cast<uint64_t>(n));
    }

    // Box-Muller, one draw per call
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // rejection-sampled normal restricted to [-bound, bound] stddevs
    double truncated_normal(double stddev, double bound = 2.0) {
        double z = normal();
        while (std::abs(z) > bound) z = normal();
        return z * stddev;
    }

    bool coin(double p) { return uniform() < p; }

private:
    uint64_t state_;
};

} // namespace wegpipe
