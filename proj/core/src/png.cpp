#include "srh/png.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

#include "srh/common.hpp"

namespace srh::png {

namespace {

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
    put_u32be(out, std::uint32_t(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, out.data() + crc_start, uInt(out.size() - crc_start));
    put_u32be(out, std::uint32_t(crc));
}

std::vector<std::uint8_t> deflate_raw(const std::vector<std::uint8_t>& raw) {
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw Error("zlib compression failed");
    compressed.resize(bound);
    return compressed;
}

std::vector<std::uint8_t> assemble(std::uint32_t width, std::uint32_t height, std::uint8_t depth,
                                   std::uint8_t color_type,
                                   const std::vector<std::uint8_t>& filtered) {
    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    put_u32be(ihdr, width);
    put_u32be(ihdr, height);
    ihdr.push_back(depth);
    ihdr.push_back(color_type);
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", deflate_raw(filtered));
    put_chunk(out, "IEND", {});
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_rgba8(std::uint32_t width, std::uint32_t height,
                                       const std::vector<std::uint8_t>& data) {
    if (data.size() != std::size_t(width) * height * 4)
        throw Error("rgba8 data size mismatch");
    std::vector<std::uint8_t> filtered;
    filtered.reserve(std::size_t(height) * (1 + std::size_t(width) * 4));
    for (std::uint32_t r = 0; r < height; ++r) {
        filtered.push_back(0);  // filter type none
        const std::uint8_t* row = data.data() + std::size_t(r) * width * 4;
        filtered.insert(filtered.end(), row, row + std::size_t(width) * 4);
    }
    return assemble(width, height, 8, 6, filtered);
}

std::vector<std::uint8_t> encode_gray16(std::uint32_t width, std::uint32_t height,
                                        const std::vector<std::uint16_t>& data) {
    if (data.size() != std::size_t(width) * height)
        throw Error("gray16 data size mismatch");
    std::vector<std::uint8_t> filtered;
    filtered.reserve(std::size_t(height) * (1 + std::size_t(width) * 2));
    for (std::uint32_t r = 0; r < height; ++r) {
        filtered.push_back(0);
        for (std::uint32_t c = 0; c < width; ++c) {
            std::uint16_t v = data[std::size_t(r) * width + c];
            filtered.push_back(std::uint8_t(v >> 8));
            filtered.push_back(std::uint8_t(v));
        }
    }
    return assemble(width, height, 16, 0, filtered);
}

void write_file(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for write: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace srh::png
