#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace alora {

/// Shortest text that parses back to the same double (locale independent).
std::string format_shortest(double value);

/// Exactly 17 significant digits, '.' decimal, general notation.
std::string format_17(double value);

std::optional<double> parse_double(std::string_view text);
std::optional<std::uint64_t> parse_u64(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::string_view trim(std::string_view text);

}  // namespace alora
