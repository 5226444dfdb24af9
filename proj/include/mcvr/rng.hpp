#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace mcvr {

// SplitMix64 finalizer. Full-avalanche mixing of a 64-bit word.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

// Stream-derivation tags. One tag per role so (seed, trial, render, stratum)
// always map to the same stream no matter which thread asks first.
enum StreamTag : std::uint64_t {
    kTagTrial = 1,
    kTagRender = 2,
    kTagTimestep = 3,
    kTagNoise = 4,
    kTagCell = 5,
    kTagInstance = 6,
    kTagReference = 7,
};

// Counter-based random stream: output i is mix64(key + i*gamma), so draws are
// a pure function of (key, position). Child streams re-key by (tag, index).
class RngStream {
  public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed) : key_(mix64(seed + kGolden)) {}

    RngStream child(std::uint64_t tag, std::uint64_t index) const {
        RngStream out;
        out.key_ = mix64(mix64(key_ + kGolden * (tag + 1)) + index * 0xda942042e4dd58b5ULL);
        return out;
    }

    std::uint64_t next_u64() {
        counter_ += kGolden;
        return mix64(key_ ^ counter_);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * kPi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    void fill_normal(std::span<double> out) {
        for (double& x : out) x = normal();
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> out(n);
        fill_normal(out);
        return out;
    }

  private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mcvr
