#include "srh/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace srh::synth {

namespace {

// Class texture table. Loose analogues of the morphology each diagnosis shows
// on SRH: lymphoma = very dense small cells, metastasis = clustered large
// cells, schwannoma = spindled, normal brain = sparse somata over lipid-rich
// background, nondiagnostic = near-featureless low-variance background.
const std::array<TextureParams, kNumClasses> kTable = {{
    // bg45   bg30  density  r    jit  aspect a45   a30   noise  ramp   rings
    {0.18, 0.30, 0.0100, 3.0, 0.2, 1.0, 0.10, 0.40, 0.015, 0.020, 0, 0, 0, 0, 1, 0.0},   // pituitary_adenoma
    {0.26, 0.26, 0.0060, 4.5, 0.4, 1.0, 0.15, 0.45, 0.015, 0.020,
     8e-5, 12.0, 2.5, 0.25, 1, 0.0},                                                     // meningioma
    {0.33, 0.27, 0.0070, 4.0, 0.3, 3.5, 0.18, 0.34, 0.015, 0.020, 0, 0, 0, 0, 1, 0.0},   // schwannoma
    {0.12, 0.34, 0.0160, 2.2, 0.2, 1.0, 0.08, 0.50, 0.015, 0.020, 0, 0, 0, 0, 1, 0.0},   // lymphoma
    {0.20, 0.30, 0.0050, 5.5, 0.5, 1.0, 0.20, 0.38, 0.020, 0.020, 0, 0, 0, 0, 3, 9.0},  // metastasis
    {0.46, 0.15, 0.0012, 5.0, 0.3, 1.0, 0.10, 0.35, 0.020, 0.025, 0, 0, 0, 0, 1, 0.0},   // normal_brain
    {0.31, 0.20, 0.0030, 4.0, 0.3, 1.0, 0.15, 0.22, 0.015, 0.020, 0, 0, 0, 0, 5, 7.0},   // normal_pituitary
    {0.10, 0.08, 0.0000, 0.0, 0.0, 1.0, 0.00, 0.00, 0.004, 0.005, 0, 0, 0, 0, 1, 0.0},   // nondiagnostic
}};

void check_dims(std::uint32_t height, std::uint32_t width, std::uint32_t min_side) {
    if (height < min_side || width < min_side)
        throw SizeError("slide dimensions below minimum side " + std::to_string(min_side));
}

// Additive gaussian blobs, optional whorl rings, zero-mean illumination ramp,
// pixel noise. Writes into double accumulators on the [0,1] scale.
void render_texture(const TextureParams& p, std::uint64_t seed, std::uint32_t height,
                    std::uint32_t width, std::vector<double>& ch45, std::vector<double>& ch30) {
    const std::size_t n = std::size_t(height) * width;
    ch45.assign(n, p.bg2845);
    ch30.assign(n, p.bg2930);

    Rng rng(mix_seed(seed, 0xb10b5));

    // illumination ramp: zero-mean linear gradient in a random direction
    {
        double theta = rng.uniform(0.0, 2.0 * M_PI);
        double dx = std::cos(theta), dy = std::sin(theta);
        double inv = 1.0 / std::max(height, width);
        for (std::uint32_t r = 0; r < height; ++r) {
            for (std::uint32_t c = 0; c < width; ++c) {
                double t = ((double(c) - 0.5 * width) * dx + (double(r) - 0.5 * height) * dy) * inv;
                double v = p.ramp_amp * t;
                ch45[std::size_t(r) * width + c] += v;
                ch30[std::size_t(r) * width + c] += v;
            }
        }
    }

    auto add_blob = [&](double cy, double cx, double radius, double angle, double aspect,
                        double a45, double a30) {
        double rx = radius * std::sqrt(aspect);
        double ry = radius / std::sqrt(aspect);
        double ca = std::cos(angle), sa = std::sin(angle);
        double ext = 3.0 * std::max(rx, ry);
        int r0 = int(std::floor(cy - ext));
        int r1 = int(std::ceil(cy + ext));
        int c0 = int(std::floor(cx - ext));
        int c1 = int(std::ceil(cx + ext));
        // stamped with periodic wrap so the slide mean matches the analytic
        // signature regardless of where spots land
        for (int r = r0; r <= r1; ++r) {
            std::size_t rw = std::size_t(((r % int(height)) + int(height)) % int(height));
            for (int c = c0; c <= c1; ++c) {
                double y = r - cy, x = c - cx;
                double u = x * ca + y * sa;
                double v = -x * sa + y * ca;
                double d2 = (u * u) / (rx * rx) + (v * v) / (ry * ry);
                if (d2 > 9.0) continue;
                double g = std::exp(-d2);
                std::size_t cw = std::size_t(((c % int(width)) + int(width)) % int(width));
                ch45[rw * width + cw] += a45 * g;
                ch30[rw * width + cw] += a30 * g;
            }
        }
    };

    if (p.spot_density > 0.0) {
        long total_spots = std::lround(p.spot_density * double(n));
        long clusters = std::max(1L, total_spots / std::max(1, p.cluster_size));
        for (long k = 0; k < clusters; ++k) {
            double cy = rng.uniform(0.0, height);
            double cx = rng.uniform(0.0, width);
            for (int s = 0; s < p.cluster_size; ++s) {
                double y = cy, x = cx;
                if (p.cluster_size > 1) {
                    y += p.cluster_spread * rng.normal();
                    x += p.cluster_spread * rng.normal();
                }
                double radius = p.spot_radius * (1.0 + p.radius_jitter * rng.uniform(-1.0, 1.0));
                double angle = rng.uniform(0.0, M_PI);
                add_blob(y, x, radius, angle, p.aspect, p.amp2845, p.amp2930);
            }
        }
    }

    if (p.ring_density > 0.0) {
        long rings = std::lround(p.ring_density * double(n));
        for (long k = 0; k < rings; ++k) {
            double cy = rng.uniform(0.0, height);
            double cx = rng.uniform(0.0, width);
            double R = p.ring_radius * (1.0 + 0.3 * rng.uniform(-1.0, 1.0));
            double ext = R + 3.0 * p.ring_width;
            int r0 = int(std::floor(cy - ext));
            int r1 = int(std::ceil(cy + ext));
            int c0 = int(std::floor(cx - ext));
            int c1 = int(std::ceil(cx + ext));
            for (int r = r0; r <= r1; ++r) {
                std::size_t rw = std::size_t(((r % int(height)) + int(height)) % int(height));
                for (int c = c0; c <= c1; ++c) {
                    double d = std::hypot(r - cy, c - cx);
                    double t = (d - R) / p.ring_width;
                    if (std::abs(t) > 3.0) continue;
                    double g = p.ring_amp * std::exp(-t * t);
                    std::size_t cw = std::size_t(((c % int(width)) + int(width)) % int(width));
                    ch45[rw * width + cw] += g;
                    ch30[rw * width + cw] += g;
                }
            }
        }
    }

    if (p.noise_sigma > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            ch45[i] += p.noise_sigma * rng.normal();
            ch30[i] += p.noise_sigma * rng.normal();
        }
    }
}

std::uint16_t quantize(double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

RawSrhImage quantize_image(std::uint32_t height, std::uint32_t width,
                           const std::vector<double>& ch45, const std::vector<double>& ch30) {
    RawSrhImage img;
    img.height = height;
    img.width = width;
    img.ch2845.resize(ch45.size());
    img.ch2930.resize(ch30.size());
    for (std::size_t i = 0; i < ch45.size(); ++i) {
        img.ch2845[i] = quantize(ch45[i]);
        img.ch2930[i] = quantize(ch30[i]);
    }
    return img;
}

}  // namespace

const TextureParams& texture_params(ClassLabel label) {
    return kTable[static_cast<int>(label)];
}

Signature expected_signature(ClassLabel label) {
    const TextureParams& p = texture_params(label);
    // gaussian blob integral: amp * pi * r^2, radius jitter inflates by 1+j^2/3
    double blob_area = M_PI * p.spot_radius * p.spot_radius *
                       (1.0 + p.radius_jitter * p.radius_jitter / 3.0);
    double ring_area = p.ring_density > 0.0
                           ? 2.0 * M_PI * p.ring_radius * std::sqrt(M_PI) * p.ring_width
                           : 0.0;
    Signature s;
    s.mean2845 = p.bg2845 + p.spot_density * p.amp2845 * blob_area +
                 p.ring_density * p.ring_amp * ring_area;
    s.mean2930 = p.bg2930 + p.spot_density * p.amp2930 * blob_area +
                 p.ring_density * p.ring_amp * ring_area;
    return s;
}

RawSrhImage generate_synthetic_slide(ClassLabel label, std::uint64_t patient_seed,
                                     std::uint64_t slide_seed, std::uint32_t height,
                                     std::uint32_t width, std::uint32_t min_side) {
    check_dims(height, width, min_side);
    std::uint64_t seed =
        mix_seed(mix_seed(patient_seed, slide_seed), static_cast<std::uint64_t>(label));
    std::vector<double> ch45, ch30;
    render_texture(texture_params(label), seed, height, width, ch45, ch30);
    return quantize_image(height, width, ch45, ch30);
}

MarginSlide generate_synthetic_margin_slide(ClassLabel tumor, ClassLabel nontumor,
                                            std::uint64_t mask_seed, std::uint32_t height,
                                            std::uint32_t width, double tumor_fraction,
                                            std::uint32_t min_side) {
    if (!is_tumor_class(tumor))
        throw LabelError("margin slide tumor argument is not a tumor class");
    if (is_tumor_class(nontumor))
        throw LabelError("margin slide nontumor argument is not a nontumor class");
    if (!(tumor_fraction > 0.0 && tumor_fraction < 1.0))
        throw ContractError("tumor_fraction must lie in (0, 1)");
    check_dims(height, width, min_side);

    std::vector<double> t45, t30, n45, n30;
    render_texture(texture_params(tumor), mix_seed(mask_seed, 0x70), height, width, t45, t30);
    render_texture(texture_params(nontumor), mix_seed(mask_seed, 0x71), height, width, n45, n30);

    // Smooth boundary: integer-frequency sinusoids in the column coordinate,
    // so the mean boundary row stays at height * tumor_fraction exactly.
    Rng rng(mix_seed(mask_seed, 0x72));
    std::array<double, 3> amp, phase;
    std::array<int, 3> freq;
    for (int k = 0; k < 3; ++k) {
        amp[k] = rng.uniform(0.02, 0.07) * height;
        phase[k] = rng.uniform(0.0, 2.0 * M_PI);
        freq[k] = 1 + int(rng.next_below(3));
    }

    Mask mask{height, width, std::vector<std::uint8_t>(std::size_t(height) * width, 0)};
    for (std::uint32_t c = 0; c < width; ++c) {
        double boundary = tumor_fraction * height;
        for (int k = 0; k < 3; ++k)
            boundary += amp[k] * std::sin(2.0 * M_PI * freq[k] * (double(c) / width) + phase[k]);
        for (std::uint32_t r = 0; r < height; ++r)
            mask.data[std::size_t(r) * width + c] = (double(r) < boundary) ? 1 : 0;
    }

    std::vector<double> ch45(t45.size()), ch30(t30.size());
    for (std::size_t i = 0; i < ch45.size(); ++i) {
        ch45[i] = mask.data[i] ? t45[i] : n45[i];
        ch30[i] = mask.data[i] ? t30[i] : n30[i];
    }
    return {quantize_image(height, width, ch45, ch30), std::move(mask)};
}

MarginSlide generate_infiltration_slide(ClassLabel tumor, ClassLabel nontumor,
                                        std::uint64_t seed, std::uint32_t height,
                                        std::uint32_t width, double island_radius,
                                        int island_count, std::uint32_t min_side) {
    if (!is_tumor_class(tumor))
        throw LabelError("infiltration slide tumor argument is not a tumor class");
    if (is_tumor_class(nontumor))
        throw LabelError("infiltration slide nontumor argument is not a nontumor class");
    check_dims(height, width, min_side);
    if (island_radius <= 0.0 || island_count < 1)
        throw ContractError("island_radius and island_count must be positive");
    double area_fraction =
        island_count * M_PI * island_radius * island_radius / (double(height) * width);
    if (area_fraction > 0.10)
        throw ContractError("islands would cover more than 10% of the slide");

    std::vector<double> t45, t30, n45, n30;
    render_texture(texture_params(tumor), mix_seed(seed, 0x80), height, width, t45, t30);
    render_texture(texture_params(nontumor), mix_seed(seed, 0x81), height, width, n45, n30);

    Rng rng(mix_seed(seed, 0x82));
    std::vector<std::pair<double, double>> centers;
    int attempts = 0;
    while (int(centers.size()) < island_count && attempts < 10000) {
        ++attempts;
        double cy = rng.uniform(island_radius, height - island_radius);
        double cx = rng.uniform(island_radius, width - island_radius);
        bool ok = true;
        for (auto [y, x] : centers)
            if (std::hypot(cy - y, cx - x) < 2.5 * island_radius) { ok = false; break; }
        if (ok) centers.emplace_back(cy, cx);
    }
    if (int(centers.size()) < island_count)
        throw ContractError("could not place requested islands without overlap");

    Mask mask{height, width, std::vector<std::uint8_t>(std::size_t(height) * width, 0)};
    for (auto [cy, cx] : centers) {
        int r0 = std::max(0, int(cy - island_radius) - 1);
        int r1 = std::min(int(height) - 1, int(cy + island_radius) + 1);
        int c0 = std::max(0, int(cx - island_radius) - 1);
        int c1 = std::min(int(width) - 1, int(cx + island_radius) + 1);
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c)
                if (std::hypot(r - cy, c - cx) <= island_radius)
                    mask.data[std::size_t(r) * width + c] = 1;
    }

    std::vector<double> ch45(t45.size()), ch30(t30.size());
    for (std::size_t i = 0; i < ch45.size(); ++i) {
        ch45[i] = mask.data[i] ? t45[i] : n45[i];
        ch30[i] = mask.data[i] ? t30[i] : n30[i];
    }
    return {quantize_image(height, width, ch45, ch30), std::move(mask)};
}

}  // namespace srh::synth
