#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace uiharvest {

/// FNV-1a over the bytes, finished with a splitmix64 avalanche so that the
/// high bits are usable as a uniform fraction.
std::uint64_t stable_hash64(std::string_view bytes);

/// Lowercase hex SHA-256 of the bytes, truncated to hex_chars (<= 64).
std::string sha256_hex(std::string_view bytes, std::size_t hex_chars = 64);

}  // namespace uiharvest
