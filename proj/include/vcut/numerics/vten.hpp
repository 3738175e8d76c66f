#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vcut/numerics/tensor.hpp"

// VTEN: "VTEN" magic, u8 version (1), u8 dtype (0 = f32, 1 = f64), u8 rank,
// u8 reserved (0), rank x u64 extents, then the row-major payload. All
// multi-byte fields are little-endian.
namespace vcut {

inline constexpr std::uint8_t kVtenVersion = 1;

std::vector<std::uint8_t> encode_vten(const Tensor& tensor);
Tensor decode_vten(std::span<const std::uint8_t> bytes);

void write_vten(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_vten(const std::filesystem::path& path);

}  // namespace vcut
