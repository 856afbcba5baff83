#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cavityforge {

/// Named substreams. Values are part of the seed derivation and must not change.
enum class Stream : std::uint64_t {
    Plan = 0x504c414e,
    Warp = 0x57415250,
    Noise = 0x4e4f4953,
    Defocus = 0x44454643,
    Corpus = 0x434f5250,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent 64-bit seed from a root seed and a path of indices,
/// e.g. derive_seed(root, {image, feature, Stream::Warp}).
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept;

inline std::uint64_t stream_id(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

using Engine = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
inline double uniform01(Engine& eng) noexcept {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01(eng);
}

}  // namespace cavityforge
