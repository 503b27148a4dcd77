#pragma once

#include <cstdint>
#include <string_view>

namespace charm {

// Portable seeded streams. Everything generated from these is bit-identical
// across compilers and standard libraries, unlike std::*_distribution.

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [-1, 1).
    double symmetric() noexcept { return 2.0 * uniform() - 1.0; }

    /// Zero-mean, unit-variance draw (sum of four uniforms, rescaled).
    /// Avoids libm so streams stay portable.
    double standard() noexcept {
        constexpr double k = 0.8660254037844386;  // sqrt(3) / 2
        return (symmetric() + symmetric() + symmetric() + symmetric()) * k;
    }

private:
    std::uint64_t state_;
};

}  // namespace charm
