#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace flowguess::utf8 {

// Returns nullopt on malformed input (overlong forms, surrogates, truncation).
std::optional<std::u32string> decode(std::string_view bytes);

std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

std::string to_hex(std::string_view bytes);
std::optional<std::string> from_hex(std::string_view hex);

}  // namespace flowguess::utf8
