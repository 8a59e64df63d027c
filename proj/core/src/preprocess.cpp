#include "srh/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace srh::preprocess {

Image3 to_three_channel(const RawSrhImage& img) {
    const std::size_t n = img.pixel_count();
    if (img.ch2845.size() != n || img.ch2930.size() != n)
        throw SizeError("channel length does not match dimensions");
    Image3 out;
    out.height = img.height;
    out.width = img.width;
    out.data.resize(3 * n);
    constexpr float kScale = 1.0f / 65535.0f;
    for (std::size_t i = 0; i < n; ++i) {
        int diff = int(img.ch2930[i]) - int(img.ch2845[i]);
        out.data[i] = float(std::max(diff, 0)) * kScale;             // R: subtracted
        out.data[n + i] = float(img.ch2845[i]) * kScale;             // G
        out.data[2 * n + i] = float(img.ch2930[i]) * kScale;         // B
    }
    return out;
}

std::vector<Patch> tile(const Image3& img, std::uint32_t patch_side, std::uint32_t stride,
                        const std::string& slide_id, const std::string& patient_id,
                        ClassLabel label) {
    if (stride < 1) throw ContractError("stride must be >= 1");
    if (patch_side > img.height || patch_side > img.width)
        throw SizeError("patch_side exceeds image dimensions");
    const std::uint32_t rows = (img.height - patch_side) / stride + 1;
    const std::uint32_t cols = (img.width - patch_side) / stride + 1;
    std::vector<Patch> patches;
    patches.reserve(std::size_t(rows) * cols);
    const std::size_t plane = img.plane_size();
    for (std::uint32_t pr = 0; pr < rows; ++pr) {
        for (std::uint32_t pc = 0; pc < cols; ++pc) {
            Patch p;
            p.side = patch_side;
            p.slide_id = slide_id;
            p.patient_id = patient_id;
            p.row = pr * stride;
            p.col = pc * stride;
            p.label = label;
            p.pixels.resize(3 * std::size_t(patch_side) * patch_side);
            for (int c = 0; c < 3; ++c) {
                const float* src = img.data.data() + std::size_t(c) * plane;
                float* dst = p.pixels.data() + std::size_t(c) * patch_side * patch_side;
                for (std::uint32_t r = 0; r < patch_side; ++r) {
                    std::memcpy(dst + std::size_t(r) * patch_side,
                                src + std::size_t(p.row + r) * img.width + p.col,
                                patch_side * sizeof(float));
                }
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

FilterDecision filter_patch(const Patch& p, const FilterThresholds& thresholds) {
    const std::size_t n = p.plane_size();
    const float* b = p.pixels.data() + 2 * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += b[i];
    mean /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = b[i] - mean;
        var += d * d;
    }
    var /= double(n);
    if (var < thresholds.t_var) return FilterDecision::Nondiagnostic;
    return mean > thresholds.t_mean ? FilterDecision::TumorCandidate
                                    : FilterDecision::NormalCandidate;
}

namespace {

void hflip(Patch& p) {
    for (int c = 0; c < 3; ++c)
        for (std::uint32_t r = 0; r < p.side; ++r)
            for (std::uint32_t a = 0, b = p.side - 1; a < b; ++a, --b)
                std::swap(p.at(c, r, a), p.at(c, r, b));
}

void vflip(Patch& p) {
    for (int c = 0; c < 3; ++c)
        for (std::uint32_t a = 0, b = p.side - 1; a < b; ++a, --b)
            for (std::uint32_t col = 0; col < p.side; ++col)
                std::swap(p.at(c, a, col), p.at(c, b, col));
}

// separable gaussian, reflect padding
void gaussian_blur(Patch& p, double sigma) {
    if (sigma < 0.05) return;
    int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * double(i) * i / (sigma * sigma));
        kernel[i + radius] = float(v);
        sum += v;
    }
    for (auto& k : kernel) k = float(k / sum);

    const int side = int(p.side);
    auto reflect = [side](int i) {
        if (i < 0) i = -i - 1;
        if (i >= side) i = 2 * side - 1 - i;
        return i;
    };
    std::vector<float> tmp(p.plane_size());
    for (int c = 0; c < 3; ++c) {
        // horizontal
        for (int r = 0; r < side; ++r)
            for (int col = 0; col < side; ++col) {
                float acc = 0.0f;
                for (int k = -radius; k <= radius; ++k)
                    acc += kernel[k + radius] * p.at(c, r, reflect(col + k));
                tmp[std::size_t(r) * side + col] = acc;
            }
        // vertical
        for (int r = 0; r < side; ++r)
            for (int col = 0; col < side; ++col) {
                float acc = 0.0f;
                for (int k = -radius; k <= radius; ++k)
                    acc += kernel[k + radius] * tmp[std::size_t(reflect(r + k)) * side + col];
                p.at(c, r, col) = acc;
            }
    }
}

// crop a scale-fraction window and bilinearly resize back to the full side
void crop_resize(Patch& p, double scale, double off_y, double off_x) {
    const int side = int(p.side);
    int crop = std::clamp(int(std::lround(scale * side)), 2, side);
    if (crop == side) return;
    int max_off = side - crop;
    int oy = int(std::lround(off_y * max_off));
    int ox = int(std::lround(off_x * max_off));
    std::vector<float> out(p.pixels.size());
    double step = double(crop - 1) / double(side - 1);
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < side; ++r) {
            double sy = oy + r * step;
            int y0 = std::min(int(sy), oy + crop - 2);
            double fy = sy - y0;
            for (int col = 0; col < side; ++col) {
                double sx = ox + col * step;
                int x0 = std::min(int(sx), ox + crop - 2);
                double fx = sx - x0;
                double v = (1 - fy) * ((1 - fx) * p.at(c, y0, x0) + fx * p.at(c, y0, x0 + 1)) +
                           fy * ((1 - fx) * p.at(c, y0 + 1, x0) + fx * p.at(c, y0 + 1, x0 + 1));
                out[(std::size_t(c) * side + r) * side + col] = float(v);
            }
        }
    }
    p.pixels = std::move(out);
}

}  // namespace

Patch apply_random_augmentation(const Patch& p, const AugmentationSpec& spec, Rng& rng) {
    Patch out = p;
    if (spec.enable_flip) {
        if (rng.next_double() < 0.5) hflip(out);
        if (rng.next_double() < 0.5) vflip(out);
    }
    if (spec.enable_crop) {
        double scale = rng.uniform(spec.crop_min, spec.crop_max);
        double oy = rng.next_double();
        double ox = rng.next_double();
        crop_resize(out, scale, oy, ox);
    }
    if (spec.enable_blur) {
        double sigma = rng.uniform(0.0, spec.blur_sigma_max);
        gaussian_blur(out, sigma);
    }
    if (spec.enable_jitter) {
        for (int c = 0; c < 3; ++c) {
            float g = float(1.0 + rng.uniform(-spec.jitter, spec.jitter));
            float* plane = out.pixels.data() + std::size_t(c) * out.plane_size();
            for (std::size_t i = 0; i < out.plane_size(); ++i) plane[i] *= g;
        }
    }
    return out;
}

std::pair<Patch, Patch> augment_pair(const Patch& p, std::uint64_t rng_seed,
                                     const AugmentationSpec& spec) {
    Rng rng1(mix_seed(rng_seed, 1));
    Rng rng2(mix_seed(rng_seed, 2));
    return {apply_random_augmentation(p, spec, rng1), apply_random_augmentation(p, spec, rng2)};
}

ChannelStats ChannelStats::compute(const std::vector<Patch>& patches) {
    if (patches.empty()) throw ContractError("no patches to compute statistics over");
    ChannelStats stats;
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t count = 0;
        for (const auto& p : patches) {
            const float* plane = p.pixels.data() + std::size_t(c) * p.plane_size();
            for (std::size_t i = 0; i < p.plane_size(); ++i) {
                sum += plane[i];
                sum2 += double(plane[i]) * plane[i];
            }
            count += p.plane_size();
        }
        double mean = sum / double(count);
        double var = std::max(sum2 / double(count) - mean * mean, 0.0);
        stats.mean[c] = mean;
        stats.stddev[c] = std::max(std::sqrt(var), 1e-6);
    }
    return stats;
}

namespace {

void put_u32le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

}  // namespace

void write_patch_cache(const std::vector<Patch>& patches, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for write: " + path.string());
    put_u32le(out, std::uint32_t(patches.size()));
    for (const auto& p : patches) {
        put_u32le(out, p.row);
        put_u32le(out, p.col);
        unsigned char label = static_cast<unsigned char>(p.label);
        out.write(reinterpret_cast<const char*>(&label), 1);
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(p.pixels.data()),
                  std::streamsize(p.pixels.size() * sizeof(float)));
    }
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<Patch> read_patch_cache(const std::filesystem::path& path, std::uint32_t patch_side,
                                    const std::string& slide_id, const std::string& patient_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    std::uint32_t count = get_u32le(in);
    if (!in) throw FormatError("truncated patch cache header: " + path.string());
    std::vector<Patch> patches(count);
    const std::size_t pixels = 3 * std::size_t(patch_side) * patch_side;
    for (auto& p : patches) {
        p.side = patch_side;
        p.slide_id = slide_id;
        p.patient_id = patient_id;
        p.row = get_u32le(in);
        p.col = get_u32le(in);
        unsigned char label = 0;
        in.read(reinterpret_cast<char*>(&label), 1);
        if (label >= kNumClasses) throw FormatError("bad label in patch cache: " + path.string());
        p.label = static_cast<ClassLabel>(label);
        p.pixels.resize(pixels);
        in.read(reinterpret_cast<char*>(p.pixels.data()),
                std::streamsize(pixels * sizeof(float)));
        if (std::size_t(in.gcount()) != pixels * sizeof(float))
            throw SizeError("truncated patch cache payload: " + path.string());
    }
    return patches;
}

}  // namespace srh::preprocess
