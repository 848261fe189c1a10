#pragma once

#include <string>
#include <string_view>

namespace mags::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
// trim + lowercase + every internal whitespace run collapsed to one space.
std::string normalize_spaces(std::string_view s);

}  // namespace mags::text
