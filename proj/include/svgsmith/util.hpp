#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace svgsmith::util {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws FormatError on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

}  // namespace svgsmith::util
