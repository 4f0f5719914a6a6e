#pragma once

#include <cmath>
#include <cstdint>

namespace alohastab {

// Counter-based uniform generator: SplitMix64 evaluated at an arbitrary
// position of its Weyl sequence. A draw is a pure function of
// (seed, stream, counter), so there is no sequential state to advance.
// Replications use different seeds, logical streams (per user, per purpose)
// use different stream ids, and coupled runs that share a seed see identical
// draws at identical (stream, counter) positions no matter which draws each
// run actually consumes.
class CounterRng {
public:
    CounterRng() noexcept : key_(0) {}
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(seed ^ mix64(stream * 0xD2B74407B1CE6E93ull))) {}

    // Raw 64-bit value at position `counter` of this stream.
    std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ + counter * 0x9E3779B97F4A7C15ull);
    }

    // U[0,1) at position `counter` of this stream (53-bit mantissa).
    double uniform(std::uint64_t counter) const noexcept {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    static std::uint64_t mix64(std::uint64_t z) noexcept {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

private:
    std::uint64_t key_;
};

// Geometric sample on {1,2,...} with success probability q, by inversion.
inline std::uint64_t geometric_gap(double u, double q) noexcept {
    if (q >= 1.0) return 1;
    double g = std::floor(std::log1p(-u) / std::log1p(-q)) + 1.0;
    if (g < 1.0) g = 1.0;
    if (g > 0x1.0p62) g = 0x1.0p62;  // overflow guard; unreachable for sane q
    return static_cast<std::uint64_t>(g);
}

}  // namespace alohastab
