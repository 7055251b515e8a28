// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace rbmcf {

namespace detail {

// SplitMix64 finalizer. Used as the mixing core of the counter-based generator.
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Combine three words into one well-mixed word.
inline uint64_t hash3(uint64_t a, uint64_t b, uint64_t c) {
    uint64_t h = mix64(a + 0x9e3779b97f4a7c15ull);
    h = mix64(h ^ (b + 0xd6e8feb86659fd93ull));
    h = mix64(h ^ (c + 0xa0761d6478bd642full));
    return h;
}

}  // namespace detail

// Counter-based deterministic RNG. A draw sequence is a pure function of
// (seed, stream), so identical keys replay identical sequences on any
// platform and independent streams can be handed out per user / per epoch
// without coordination.
class RngStream {
public:
    RngStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

    uint64_t next_u64() {
        return detail::hash3(seed_, stream_, counter_++);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes two uniforms per draw.
    double next_normal() {
        double u1 = static_cast<double>((next_u64() >> 11) | 1ull) * 0x1.0p-53;
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    bool next_bernoulli(double p) { return next_double() < p; }

private:
    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_ = 0;
};

// Stream id for one user's Gibbs chain at (epoch, step). Deliberately
// independent of worker rank and shard layout: a user consumes the same
// draws no matter how the batch is sharded.
inline uint64_t user_stream_id(uint64_t epoch, uint64_t step, uint64_t user) {
    return detail::hash3(epoch + 1, step + 1, user + 1);
}

}  // namespace rbmcf
