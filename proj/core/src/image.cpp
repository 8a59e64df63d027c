#include "srh/image.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace srh {

double Mask::covered_fraction() const {
    if (data.empty()) return 0.0;
    std::size_t on = 0;
    for (auto v : data) on += (v != 0);
    return double(on) / double(data.size());
}

void write_mask_pgm(const Mask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for write: " + path.string());
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> row(mask.width);
    for (std::uint32_t r = 0; r < mask.height; ++r) {
        for (std::uint32_t c = 0; c < mask.width; ++c)
            row[c] = mask.data[std::size_t(r) * mask.width + c] ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw Error("write failed: " + path.string());
}

Mask read_mask_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw FormatError("not a binary PGM: " + path.string());
    std::uint32_t w = 0, h = 0;
    int maxval = 0;
    in >> w >> h >> maxval;
    if (!in || maxval != 255) throw FormatError("unsupported PGM header: " + path.string());
    in.get();  // single whitespace after maxval
    Mask mask{h, w, std::vector<std::uint8_t>(std::size_t(h) * w)};
    in.read(reinterpret_cast<char*>(mask.data.data()), std::streamsize(mask.data.size()));
    if (std::size_t(in.gcount()) != mask.data.size())
        throw SizeError("truncated PGM payload: " + path.string());
    for (auto& v : mask.data) v = v >= 128 ? 1 : 0;
    return mask;
}

}  // namespace srh
