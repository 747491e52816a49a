#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace stitchdiff {

/// Deterministic counter-based RNG (splitmix64 core). The generator is
/// self-contained so streams are bit-identical across platforms and
/// standard-library versions; std::normal_distribution is deliberately not
/// used because its output sequence is implementation-defined.
///
/// One global seed fans out into independent module streams via derive():
/// the child seed is a hash of (parent seed, tag), so adding a new consumer
/// never perturbs existing streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed), has_spare_(false), spare_(0.0) {}

    std::uint64_t next_u64() {
        // splitmix64 (Steele et al.)
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0,n). n must be positive.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller; the spare value is cached so the
    /// stream stays a pure function of the call count.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t seed_for(std::string_view tag) const {
        // FNV-1a over the tag, mixed with the parent state through splitmix.
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (char c : tag) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ull;
        }
        std::uint64_t z = state_ ^ h;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Child stream for a named purpose; independent of sibling streams.
    Rng derive(std::string_view tag) const { return Rng(seed_for(tag)); }

    /// Child stream for a named purpose plus an index (per-item streams).
    Rng derive(std::string_view tag, std::uint64_t index) const {
        Rng r(seed_for(tag) ^ (0x9e3779b97f4a7c15ull * (index + 1)));
        return r;
    }

private:
    std::uint64_t state_;
    bool has_spare_;
    double spare_;
};

}  // namespace stitchdiff
