#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace detdsci {

[[nodiscard]] std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Throws detdsci::ParseError on malformed input.
[[nodiscard]] std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Lower-case hex SHA-256 digest.
[[nodiscard]] std::string sha256_hex(std::string_view data);

}  // namespace detdsci
