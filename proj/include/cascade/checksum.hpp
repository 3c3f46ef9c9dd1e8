#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cascade {

/// CRC-32 (IEEE 802.3, reflected 0xEDB88320), incremental: pass the previous
/// value as `crc` to continue a running checksum.
std::uint32_t crc32(std::span<const std::byte> data, std::uint32_t crc = 0);

/// Lowercase hex SHA-256 of a UTF-8 string.
std::string sha256_hex(std::string_view text);

}  // namespace cascade
