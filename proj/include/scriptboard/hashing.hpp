#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace scriptboard {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> data, std::uint64_t h = kFnvOffset) {
    for (std::uint8_t c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive combination of two 64-bit hashes.
constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Seed derivation: hash of a parent seed and a label.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    return hash_combine(seed, fnv1a64(label));
}

std::string to_hex(std::uint64_t value);
std::uint64_t from_hex(std::string_view hex);

/// Hex digest of a byte string (FNV-1a 64).
inline std::string digest_hex(std::string_view data) { return to_hex(fnv1a64(data)); }

} // namespace scriptboard
