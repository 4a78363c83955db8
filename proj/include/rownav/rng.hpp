#pragma once

#include <cmath>
#include <cstdint>

namespace rownav {

/// Counter-based deterministic random stream built on the SplitMix64 mixer.
///
/// Draws depend only on (key, counter), so two runs that derive the same
/// stream labels see the same noise realization regardless of how many
/// draws other streams consumed. That is what makes paired PL / PL+EKF
/// episodes share bit-identical sensor noise even though their trajectories
/// diverge. Output is reproducible across platforms: no libc distributions
/// are involved.
class Rng {
public:
    explicit Rng(std::uint64_t key = 0) : key_(mix(key ^ kGolden)) {}

    /// Child stream for a labelled substream (scan index, beam index, ...).
    Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        std::uint64_t k = key_;
        k = mix(k ^ mix(a + 0x9e3779b97f4a7c15ULL));
        k = mix(k ^ mix(b + 0xbf58476d1ce4e5b9ULL));
        k = mix(k ^ mix(c + 0x94d049bb133111ebULL));
        return Rng(FromKey{}, k);
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform double in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (two uniforms per draw, no cached state).
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    struct FromKey {};
    Rng(FromKey, std::uint64_t key) : key_(key) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace rownav
