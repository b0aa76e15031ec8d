#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace ccgm {

// PCG32 with an explicit 128-bit state (state + stream). All randomness in
// the project flows through this generator so that runs are bit-reproducible
// across platforms and resumable from two integers.
//
// Streams are derived functionally: derive(seed, {step, anchor, purpose})
// yields an independent generator, which makes batch assembly order-free.
class Rng {
public:
    Rng() : Rng(0x853c49e6748fea9bULL) {}

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += splitmix64(seed);
        next_u32();
    }

    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t h = splitmix64(seed ^ 0x9e3779b97f4a7c15ULL);
        std::uint64_t g = splitmix64(seed + 0x6a09e667f3bcc909ULL);
        for (std::uint64_t p : path) {
            h = splitmix64(h ^ splitmix64(p));
            g = splitmix64(g + splitmix64(p ^ 0xbf58476d1ce4e5b9ULL));
        }
        return Rng(h, g);
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller; always consumes exactly two uniforms so
    // the generator state stays a pure function of the draw count.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        // 1 - u1 lies in (0, 1], so the log is finite.
        return std::sqrt(-2.0 * std::log1p(-u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t state() const { return state_; }
    std::uint64_t stream() const { return inc_; }
    void restore(std::uint64_t state, std::uint64_t inc) {
        state_ = state;
        inc_ = inc;
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
};

}  // namespace ccgm
