#pragma once

#include <cstdint>
#include <initializer_list>

namespace tlmc {

// Stafford "mix13" finalizer (the SplitMix64 output function).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
    return mix64(seed ^ (mix64(v + 0x9E3779B97F4A7C15ull) + 0x632BE59BD9B4E019ull + (seed << 6) + (seed >> 2)));
}

// Logical sub-streams. A pixel sample owns one stream per domain so that
// estimator variants can draw extra numbers without perturbing the base path.
enum class RngDomain : std::uint64_t {
    Path = 1,
    CacheLevel = 2,     // cache-integral directions, offset by vertex slot
    Termination = 16,   // heuristic coin flips
    Training = 32,
    Measurement = 64,
    Fitting = 128,
    Scene = 256,
};

// Counter-based generator: the value at position `counter` of stream
// (seed, sequence) is a pure function of those three integers.
class RngStream {
public:
    constexpr RngStream() = default;
    constexpr RngStream(std::uint64_t seed, std::uint64_t sequence, std::uint64_t counter = 0)
        : seed_(seed), sequence_(sequence), counter_(counter), key_(hash_combine(mix64(seed), sequence)) {}

    // Stream keyed by an arbitrary list of integers, e.g. {pixel, frame, sample, domain}.
    static constexpr RngStream keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
        std::uint64_t seq = 0x2545F4914F6CDD1Dull;
        for (std::uint64_t k : key) seq = hash_combine(seq, k);
        return RngStream(seed, seq);
    }

    constexpr RngStream derive(std::uint64_t tag) const { return RngStream(seed_, hash_combine(sequence_, tag)); }

    constexpr std::uint64_t next_u64() { return mix64(key_ + (counter_++ + 1) * 0x9E3779B97F4A7C15ull); }

    // Uniform in [0, 1) with 53 random bits.
    constexpr double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    constexpr float uniform_float() { return float(next_u64() >> 40) * 0x1.0p-24f; }

    // Uniform integer in [0, n).
    constexpr std::uint32_t uniform_int(std::uint32_t n) {
        return std::uint32_t((std::uint64_t(std::uint32_t(next_u64() >> 32)) * n) >> 32);
    }

    constexpr std::uint64_t seed() const { return seed_; }
    constexpr std::uint64_t sequence() const { return sequence_; }
    constexpr std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t sequence_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t key_ = hash_combine(mix64(0), 0);
};

}  // namespace tlmc
