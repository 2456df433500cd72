#pragma once

// ADNT tensor files: "ADNT", u8 version (1), u32 rank, rank x u32 dims,
// then the float32 payload. All fields little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adn/tensor.hpp"

namespace adn {

inline constexpr std::uint8_t kAdntVersion = 1;

std::vector<std::uint8_t> encode_adnt(const Tensor& t);
Tensor decode_adnt(std::span<const std::uint8_t> bytes);

void write_adnt(const std::filesystem::path& path, const Tensor& t);
Tensor read_adnt(const std::filesystem::path& path);

}  // namespace adn
