#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "srh/common.hpp"

namespace srh {

// Two co-registered 16-bit intensity channels (2845 and 2930 cm^-1).
struct RawSrhImage {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint16_t> ch2845;  // row-major, height*width
    std::vector<std::uint16_t> ch2930;

    std::size_t pixel_count() const { return std::size_t(height) * width; }
    bool operator==(const RawSrhImage&) const = default;
};

// Planar 3-channel float image, values nominally in [0,1].
// Channel order: R = clamped (ch2930 - ch2845), G = ch2845, B = ch2930.
struct Image3 {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<float> data;  // 3 * height * width, planar RGB

    float& at(int c, std::uint32_t r, std::uint32_t col) {
        return data[(std::size_t(c) * height + r) * width + col];
    }
    float at(int c, std::uint32_t r, std::uint32_t col) const {
        return data[(std::size_t(c) * height + r) * width + col];
    }
    std::size_t plane_size() const { return std::size_t(height) * width; }
};

// Binary per-pixel mask; 1 = tumor, 0 = nontumor.
struct Mask {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint8_t> data;

    double covered_fraction() const;
};

// PGM (P5, maxval 255): 0 = nontumor, 255 = tumor.
void write_mask_pgm(const Mask& mask, const std::filesystem::path& path);
Mask read_mask_pgm(const std::filesystem::path& path);

}  // namespace srh
