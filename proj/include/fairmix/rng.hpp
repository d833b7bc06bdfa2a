#pragma once

#include <cstdint>
#include <random>

namespace fairmix {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Named substreams of a master seed.
enum class Stream : std::uint64_t {
    Data = 1,
    Partition = 2,
    Init = 3,
    Sampling = 4,
    Client = 5,
    Split = 6,
};

/// Seed for substream (stream, a, b) of `master`. Counter-based: the value depends only on
/// its arguments, never on how many other streams were drawn before.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ static_cast<std::uint64_t>(stream));
    h = mix64(h ^ a);
    h = mix64(h ^ (b + 0x632be59bd9b4e019ull));
    return h;
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0) {
    return Rng(derive_seed(master, stream, a, b));
}

}  // namespace fairmix
