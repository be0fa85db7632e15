#include "forecast_forge/rng.hpp"

#include "forecast_forge/errors.hpp"

namespace forecast_forge {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw ArgumentError("RngStream::below requires a positive bound");
    // Reject the biased tail of the 64-bit range.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

bool RngStream::bernoulli(double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform() < p;
}

std::size_t RngStream::pick(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw ArgumentError("RngStream::pick requires positive total weight");
    double u = uniform() * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last = i;
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return last;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id, std::string_view purpose) {
    std::uint64_t tag = 0xcbf29ce484222325ULL;
    for (unsigned char ch : purpose) {
        tag ^= ch;
        tag *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(splitmix64(master) ^ id) ^ tag);
}

}  // namespace forecast_forge
