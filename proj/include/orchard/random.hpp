#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace orchard {

// std::mt19937_64 output is fixed by the standard, the std:: distributions are
// not. Everything seeded in this library draws through these helpers so output
// bytes are identical across standard library implementations.

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `s`.
std::uint64_t hash_string(std::string_view s) noexcept;

/// Order-sensitive mix of a seed with further key material.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);
    /// Uniform integer on [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p);
    double normal();
    /// Poisson variate by inversion; adequate for the small means used here.
    std::uint64_t poisson(double mean);

private:
    std::mt19937_64 engine_;
};

} // namespace orchard
