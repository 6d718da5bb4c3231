#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "kangura/error.hpp"

namespace kangura {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes two 64-bit values into one; used to derive independent per-sample
// seeds as hash64(global_seed, class, index) chains.
inline std::uint64_t hash_combine64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// xoshiro256** seeded through splitmix64. Hand-rolled so that identical
// seeds produce identical streams on every platform; std::uniform_*
// distributions carry no such guarantee.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw DomainError("uniform: requires lo < hi");
        double v = lo + next_unit() * (hi - lo);
        if (v >= hi) v = std::nextafter(hi, lo);
        return v;
    }

    // Unbiased integer in [0, n) via rejection on the top bits.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw DomainError("uniform_int: requires n > 0");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Box-Muller; consumes exactly two uniforms per call.
    double normal(double mean = 0.0, double sigma = 1.0) {
        double u1;
        do {
            u1 = next_unit();
        } while (u1 <= 0.0);
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t state_[4];
};

inline std::vector<double> seeded_uniform(SeededRng& rng, double lo, double hi, std::size_t n) {
    if (!(lo < hi)) throw DomainError("seeded_uniform: requires lo < hi");
    std::vector<double> out(n);
    for (auto& v : out) v = rng.uniform(lo, hi);
    return out;
}

}  // namespace kangura
