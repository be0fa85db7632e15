#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace forecast_forge {

/// Seeded random stream. Every draw is computed from raw 64-bit engine
/// output, so sequences do not depend on the standard library's
/// distribution implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// True with probability p; p <= 0 never, p >= 1 always.
    bool bernoulli(double p);

    /// Index drawn proportionally to non-negative weights.
    std::size_t pick(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

/// Seed for an independent stream keyed by (master seed, id, purpose).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id, std::string_view purpose);

}  // namespace forecast_forge
