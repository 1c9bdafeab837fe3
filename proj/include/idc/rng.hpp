#pragma once

// Counter-based random numbers.
//
// A draw is a pure function of (seed, stream, counter): the stream key is
// splitmix64(splitmix64(seed) ^ splitmix64(stream + 1)), and the i-th draw of
// a stream is the splitmix64 finaliser applied to key + (i + 1) * golden.
// Consumers name their streams (one per channel coordinate, one for noise,
// ...) so changing the order in which draws are made never changes values.

#include <cstdint>

namespace idc::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Stream ids used across the code base.
inline constexpr std::uint64_t kChannelStreamBase = 0;           // + coordinate index
inline constexpr std::uint64_t kNoiseStream = 1ull << 40;
inline constexpr std::uint64_t kNoiseSelectStream = (1ull << 40) + 1;
inline constexpr std::uint64_t kNoiseAltStream = (1ull << 40) + 2;

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 1));
}

// Seed for repetition `rep` of an experiment seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t rep) {
    return mix64(seed * kGolden + mix64(rep ^ 0xA5A5A5A5A5A5A5A5ull));
}

constexpr std::uint64_t bits(std::uint64_t key, std::uint64_t counter) {
    return mix64(key + (counter + 1) * kGolden);
}

// Uniform on the open interval (0, 1).
constexpr double uniform(std::uint64_t key, std::uint64_t counter) {
    return (static_cast<double>(bits(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream) : key_(stream_key(seed, stream)) {}

    double uniform() { return rng::uniform(key_, counter_++); }
    double normal();
    double cauchy(double scale);
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace idc::rng
