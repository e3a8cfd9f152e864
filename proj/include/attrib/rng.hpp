#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace attrib {

// Counter-based generator: every variate is a pure function of
// (seed, stream, counter). Substreams never overlap and results do not
// depend on evaluation order, so parallel draws stay reproducible.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        std::uint64_t x = mix64(seed_ + GOLDEN);
        x = mix64(x ^ (stream_ * MUL1));
        x = mix64(x ^ (counter_ * MUL2));
        ++counter_;
        return x;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Rejection keeps the distribution exact.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Fisher-Yates over indices 0..n-1 written into out.
    template <typename IndexVec>
    void permutation(std::size_t n, IndexVec& out) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(out[i - 1], out[j]);
        }
    }

    static std::uint64_t mix64(std::uint64_t x) {
        x += GOLDEN;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    static constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t MUL1 = 0xD6E8FEB86659FD93ULL;
    static constexpr std::uint64_t MUL2 = 0xCA5A826395121157ULL;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stable seed derivation from a tag (FNV-1a then mixed). Used to give each
// sweep spec / pipeline stage its own independent stream family.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return CounterRng::mix64(seed ^ h);
}

}  // namespace attrib
