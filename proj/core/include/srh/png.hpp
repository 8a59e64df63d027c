#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace srh::png {

// Minimal deterministic PNG encoders (zlib deflate, fixed settings).

// data: interleaved RGBA, 4 bytes per pixel, row-major.
std::vector<std::uint8_t> encode_rgba8(std::uint32_t width, std::uint32_t height,
                                       const std::vector<std::uint8_t>& data);

// data: one value per pixel, row-major; stored big-endian per the PNG spec.
std::vector<std::uint8_t> encode_gray16(std::uint32_t width, std::uint32_t height,
                                        const std::vector<std::uint16_t>& data);

void write_file(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path);

}  // namespace srh::png
