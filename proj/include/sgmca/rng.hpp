#pragma once

#include <cstdint>

namespace sgmca {

/// Seeded pseudo-random generator with a fixed, documented algorithm so that
/// Monte-Carlo runs reproduce across machines and standard libraries.
///
/// Stream: xoshiro256++ (Blackman & Vigna), state initialized from the seed
/// with splitmix64. Uniform doubles take the top 53 bits of the 64-bit output.
/// Gaussian variates use the Marsaglia polar method with a one-value cache;
/// consumption order is part of the format.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal.
    double gaussian();

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t state_[4];
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// splitmix64 finalizer; also used to derive per-trial seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic seed for (master_seed, stream, index) tuples.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index);

} // namespace sgmca
