#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mags {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws DataError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Lowercase hex BLAKE2b-256 digest.
std::string content_hash(std::string_view data);

}  // namespace mags
