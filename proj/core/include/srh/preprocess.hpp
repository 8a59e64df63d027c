#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "srh/common.hpp"
#include "srh/image.hpp"

namespace srh::preprocess {

// 3-channel virtual image tile with provenance. Pixel values are on the
// [0,1] scale; training-set standardization is applied at model input, never
// here, so filter thresholds stay split-independent.
struct Patch {
    std::uint32_t side = 0;
    std::vector<float> pixels;  // planar, 3 * side * side (R, G, B)
    std::string slide_id;
    std::string patient_id;
    std::uint32_t row = 0;  // offset of top-left corner in the slide
    std::uint32_t col = 0;
    ClassLabel label = ClassLabel::Nondiagnostic;

    float& at(int c, std::uint32_t r, std::uint32_t cc) {
        return pixels[(std::size_t(c) * side + r) * side + cc];
    }
    float at(int c, std::uint32_t r, std::uint32_t cc) const {
        return pixels[(std::size_t(c) * side + r) * side + cc];
    }
    std::size_t plane_size() const { return std::size_t(side) * side; }
};

// R = max(ch2930 - ch2845, 0)/65535, G = ch2845/65535, B = ch2930/65535.
Image3 to_three_channel(const RawSrhImage& img);

// Nonoverlapping when stride == patch_side; overlapping strides serve
// segmentation. Right/bottom remainders are discarded.
std::vector<Patch> tile(const Image3& img, std::uint32_t patch_side, std::uint32_t stride,
                        const std::string& slide_id = {}, const std::string& patient_id = {},
                        ClassLabel label = ClassLabel::Nondiagnostic);

enum class FilterDecision { TumorCandidate, NormalCandidate, Nondiagnostic };

// Heuristic stand-in for the pretrained 3-class filter network. Decides from
// the B channel (2930 cm^-1): variance below t_var = acellular, else mean
// above t_mean = dense cellularity.
struct FilterThresholds {
    double t_var = 2e-4;
    double t_mean = 0.30;
};
inline constexpr FilterThresholds kDefaultFilterThresholds{};

FilterDecision filter_patch(const Patch& p,
                            const FilterThresholds& thresholds = kDefaultFilterThresholds);

// Stochastic transformation set T for contrastive training.
struct AugmentationSpec {
    bool enable_flip = true;     // horizontal and vertical, p = 0.5 each
    bool enable_blur = true;     // gaussian, sigma in [0, blur_sigma_max]
    bool enable_crop = true;     // crop-resize, scale in [crop_min, crop_max]
    bool enable_jitter = true;   // per-channel intensity, +/- jitter
    double blur_sigma_max = 1.5;
    double crop_min = 0.7;
    double crop_max = 1.0;
    double jitter = 0.10;

    static AugmentationSpec identity() {
        return {false, false, false, false, 0.0, 1.0, 1.0, 0.0};
    }
    static AugmentationSpec flips_only() {
        return {true, false, false, false, 0.0, 1.0, 1.0, 0.0};
    }
};

// One random transformation composition sampled from the spec.
Patch apply_random_augmentation(const Patch& p, const AugmentationSpec& spec, Rng& rng);

// Two independent compositions t1, t2 of the same patch (the contrastive
// view pair). Deterministic given rng_seed; label and provenance preserved.
std::pair<Patch, Patch> augment_pair(const Patch& p, std::uint64_t rng_seed,
                                     const AugmentationSpec& spec = {});

// Per-channel standardization statistics. Computed over the training split
// only and carried in the checkpoint.
struct ChannelStats {
    std::array<double, 3> mean = {0.0, 0.0, 0.0};
    std::array<double, 3> stddev = {1.0, 1.0, 1.0};

    bool operator==(const ChannelStats&) const = default;

    static ChannelStats compute(const std::vector<Patch>& patches);
    float apply(int channel, float v) const {
        return float((v - mean[channel]) / stddev[channel]);
    }
};

// Per-slide patch cache blob: u32 patch count, then per patch offsets
// (2 x u32), label (u8), 3 * side^2 float32 little-endian.
void write_patch_cache(const std::vector<Patch>& patches, const std::filesystem::path& path);
std::vector<Patch> read_patch_cache(const std::filesystem::path& path, std::uint32_t patch_side,
                                    const std::string& slide_id = {},
                                    const std::string& patient_id = {});

}  // namespace srh::preprocess
