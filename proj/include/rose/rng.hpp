#pragma once

#include <cmath>
#include <cstdint>

// Counter-based deterministic randomness. Every random quantity in the
// toolkit is a pure function of a 64-bit key chain, so any draw can be
// reproduced in isolation (no shared mutable generator state).

namespace rose::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// Fold one key word into a running hash.
inline std::uint64_t chain(std::uint64_t h, std::uint64_t w) {
    return mix64(h + kGolden + w);
}

// Map 64 random bits to [0, 1) with 53-bit resolution.
inline double uniform01(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Box-Muller from two independent 64-bit draws. The first uniform is mapped
// to (0, 1] so the log never sees zero.
inline double gaussian(std::uint64_t bits1, std::uint64_t bits2) {
    const double u1 = 1.0 - uniform01(bits1);
    const double u2 = uniform01(bits2);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    return r * std::cos(theta);
}

// Sequential splitmix64 stream for bulk draws (init, data generation,
// direction sampling). The key fixes the stream; draws advance a counter.
class Stream {
public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix64(state_);
    }

    double next_uniform() { return uniform01(next_u64()); }

    double next_gaussian() {
        const std::uint64_t b1 = next_u64();
        const std::uint64_t b2 = next_u64();
        return gaussian(b1, b2);
    }

private:
    std::uint64_t state_;
};

// Key domains keep independent uses of the same user seed decorrelated.
enum class Domain : std::uint64_t {
    init = 1,
    dropout = 2,
    data = 3,
    direction = 4,
    shuffle = 5,
    perturb = 6,
};

inline std::uint64_t domain_key(std::uint64_t seed, Domain d) {
    return chain(seed, static_cast<std::uint64_t>(d));
}

// Identity of one training-time dropout draw site. Element draws hash the
// full tuple, so masks are order-independent and reproducible per element.
struct DropoutKey {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::uint64_t pass_index = 0;

    std::uint64_t element_bits(std::uint64_t site, std::uint64_t element) const {
        std::uint64_t h = domain_key(seed, Domain::dropout);
        h = chain(h, step);
        h = chain(h, pass_index);
        h = chain(h, site);
        h = chain(h, element);
        return h;
    }
};

}  // namespace rose::rng
