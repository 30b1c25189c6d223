#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace logokit {

/// Deterministic random stream derived from a global seed and a stream label.
/// Identical (seed, label) pairs yield identical streams; distinct labels give
/// independent streams. All distributions are hand-rolled on top of the
/// standardized mt19937_64 output so draw sequences are stable across
/// platforms and standard-library versions.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view label);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform();
    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [lo, hi] inclusive. Requires lo <= hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Standard normal via Box-Muller.
    double normal();

    /// Seed for a derived child stream, stable under (seed, label, sublabel).
    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t basis = 14695981039346656037ull);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace logokit
