#pragma once

// Portable seeded random streams.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
// Stream splitting: the seed of substream k is splitmix64(seed ^ (k * golden)),
// so every consumer (frequencies, qubit couplings, internal couplings, ...)
// draws from its own sequence and toggling one consumer never shifts another.
// Uniform doubles are built from the top 53 bits of one engine output, which
// avoids the implementation-defined std::uniform_real_distribution.

#include <cstdint>
#include <random>

namespace qdecay {

enum class Stream : std::uint64_t {
    frequencies = 1,
    qubit_couplings = 2,
    internal_couplings = 3,
    moment_sampling = 4,
    realization = 5,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed ^ (stream * 0x9E3779B97F4A7C15ull));
}

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
    return std::mt19937_64(stream_seed(seed, static_cast<std::uint64_t>(stream)));
}

/// Uniform on [0, 1).
inline double uniform01(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& engine, double lo, double hi) {
    return lo + (hi - lo) * uniform01(engine);
}

/// Seed of the k-th member of an ensemble of bath realizations. Member 0 keeps
/// the base seed so a single run and the first ensemble member coincide.
constexpr std::uint64_t realization_seed(std::uint64_t seed, std::uint64_t member) noexcept {
    return member == 0 ? seed
                       : stream_seed(seed + member, static_cast<std::uint64_t>(Stream::realization));
}

}  // namespace qdecay
