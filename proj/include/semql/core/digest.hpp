#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace semql {

/// Lowercase hex SHA-256.
[[nodiscard]] std::string sha256_hex(std::string_view data);

/// 64-bit mix of a string; used to derive per-request pseudo-random draws
/// that do not depend on call order.
[[nodiscard]] std::uint64_t stable_hash64(std::string_view data, std::uint64_t seed = 0);

/// splitmix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from 64 random bits.
[[nodiscard]] constexpr double unit_interval(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace semql
