#pragma once

#include <cstdint>

#include "srh/common.hpp"
#include "srh/image.hpp"

namespace srh::synth {

// Parametric texture family standing in for the clinical cohort. One row per
// class; every derived quantity (expected channel means, filter margins) is
// computed from this table so the generator and its oracles cannot drift
// apart.
struct TextureParams {
    double bg2845 = 0.0;        // background intensity, [0,1] scale
    double bg2930 = 0.0;
    double spot_density = 0.0;  // expected spots per pixel
    double spot_radius = 0.0;   // gaussian blob radius, px
    double radius_jitter = 0.0; // relative radius spread, uniform +/-
    double aspect = 1.0;        // elongation; 1 = round, >1 = spindled
    double amp2845 = 0.0;       // peak blob amplitude per channel
    double amp2930 = 0.0;
    double noise_sigma = 0.0;   // per-pixel gaussian noise, both channels
    double ramp_amp = 0.0;      // zero-mean low-frequency illumination ramp
    double ring_density = 0.0;  // whorl rings per pixel (meningioma)
    double ring_radius = 0.0;
    double ring_width = 0.0;
    double ring_amp = 0.0;
    int cluster_size = 1;       // spots per cluster; 1 = independent placement
    double cluster_spread = 0.0;
};

const TextureParams& texture_params(ClassLabel label);

// Expected per-channel slide means implied by the parameter table
// (background + blob integral + ring integral). Edge clipping is ignored;
// it is O(radius / side) and absorbed by test tolerances.
struct Signature {
    double mean2845 = 0.0;
    double mean2930 = 0.0;
};
Signature expected_signature(ClassLabel label);

inline constexpr std::uint32_t kDefaultMinSide = 300;

// Deterministic in (label, patient_seed, slide_seed); distinct slides of one
// patient share patient_seed and vary slide_seed.
RawSrhImage generate_synthetic_slide(ClassLabel label, std::uint64_t patient_seed,
                                     std::uint64_t slide_seed, std::uint32_t height,
                                     std::uint32_t width,
                                     std::uint32_t min_side = kDefaultMinSide);

struct MarginSlide {
    RawSrhImage slide;
    Mask mask;  // 1 = tumor texture, pixel-exact
};

// Two textures split by a smooth random boundary; tumor covers roughly
// tumor_fraction of the pixels.
MarginSlide generate_synthetic_margin_slide(ClassLabel tumor, ClassLabel nontumor,
                                            std::uint64_t mask_seed, std::uint32_t height,
                                            std::uint32_t width, double tumor_fraction = 0.5,
                                            std::uint32_t min_side = kDefaultMinSide);

// Mostly-nontumor slide with small implanted tumor islands (microscopic
// infiltration analogue). Total island area stays below 10% of the slide.
MarginSlide generate_infiltration_slide(ClassLabel tumor, ClassLabel nontumor,
                                        std::uint64_t seed, std::uint32_t height,
                                        std::uint32_t width, double island_radius,
                                        int island_count,
                                        std::uint32_t min_side = kDefaultMinSide);

}  // namespace srh::synth
