#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace chart_refinery {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

// 64-bit FNV-1a; used for seeding deterministic mocks, not for integrity.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace chart_refinery
