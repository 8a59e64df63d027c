#include "srh/segment.hpp"

#include <algorithm>
#include <cmath>

#include "srh/png.hpp"
#include "srh/preprocess.hpp"

namespace srh::segment {

eval::ProbDist Heatmap::prob_at(std::uint32_t r, std::uint32_t c) const {
    std::size_t idx = std::size_t(r) * width + c;
    std::uint32_t cov = coverage[idx];
    if (cov == 0) throw ContractError("pixel not covered by any patch");
    eval::ProbDist p(kNumClasses);
    const std::size_t plane = std::size_t(height) * width;
    for (int k = 0; k < kNumClasses; ++k) p[k] = double(accum[k * plane + idx]) / cov;
    return p;
}

double Heatmap::coverage_fraction() const {
    std::size_t covered_px = 0;
    for (auto c : coverage) covered_px += (c > 0);
    return coverage.empty() ? 0.0 : double(covered_px) / double(coverage.size());
}

Heatmap probability_heatmap(const Image3& slide, const train::Checkpoint& ckpt,
                            std::uint32_t patch_side, std::uint32_t stride, int batch_size) {
    if (patch_side > slide.height || patch_side > slide.width)
        throw SizeError("slide smaller than a patch");
    if (stride < 1 || stride > patch_side)
        throw ContractError("stride must lie in [1, patch_side]");

    auto patches = preprocess::tile(slide, patch_side, stride);
    auto dists = train::classify_patches(ckpt, patches, batch_size);

    Heatmap h;
    h.height = slide.height;
    h.width = slide.width;
    h.patch_side = patch_side;
    h.stride = stride;
    const std::size_t plane = std::size_t(h.height) * h.width;
    h.accum.assign(std::size_t(kNumClasses) * plane, 0.0f);
    h.coverage.assign(plane, 0);

    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto& p = patches[i];
        for (std::uint32_t r = p.row; r < p.row + patch_side; ++r) {
            for (std::uint32_t c = p.col; c < p.col + patch_side; ++c) {
                std::size_t idx = std::size_t(r) * h.width + c;
                ++h.coverage[idx];
                for (int k = 0; k < kNumClasses; ++k)
                    h.accum[k * plane + idx] += float(dists[i][k]);
            }
        }
    }
    h.slide_aggregate = eval::soft_aggregate(dists);
    return h;
}

TwoChannelView two_channel_view(const Heatmap& h) {
    if (h.slide_aggregate.empty()) throw ContractError("heatmap missing slide aggregate");
    TwoChannelView view;
    int best_t = 0;
    for (int k = 1; k < kNumTumorClasses; ++k)
        if (h.slide_aggregate[k] > h.slide_aggregate[best_t]) best_t = k;
    int best_n = kNumTumorClasses;
    for (int k = kNumTumorClasses + 1; k < kNumClasses; ++k)
        if (h.slide_aggregate[k] > h.slide_aggregate[best_n]) best_n = k;
    view.tumor_class = static_cast<ClassLabel>(best_t);
    view.nontumor_class = static_cast<ClassLabel>(best_n);

    const std::size_t plane = std::size_t(h.height) * h.width;
    view.tumor.assign(plane, 0.0f);
    view.nontumor.assign(plane, 0.0f);
    for (std::size_t i = 0; i < plane; ++i) {
        if (h.coverage[i] == 0) continue;
        view.tumor[i] = h.accum[std::size_t(best_t) * plane + i] / h.coverage[i];
        view.nontumor[i] = h.accum[std::size_t(best_n) * plane + i] / h.coverage[i];
    }
    return view;
}

std::vector<std::uint8_t> render_overlay(const Image3& slide, const Heatmap& h,
                                         const TwoChannelView& view, double alpha) {
    if (slide.height != h.height || slide.width != h.width)
        throw ShapeError("slide and heatmap dimensions differ");
    if (alpha < 0.0 || alpha > 1.0) throw ContractError("alpha must lie in [0, 1]");
    const std::size_t plane = slide.plane_size();
    std::vector<std::uint8_t> rgba(plane * 4);
    for (std::size_t i = 0; i < plane; ++i) {
        double base =
            (slide.data[i] + slide.data[plane + i] + slide.data[2 * plane + i]) / 3.0 * 255.0;
        double t = 0.0, n = 0.0;
        if (h.coverage[i] > 0) {
            t = std::clamp(double(view.tumor[i]), 0.0, 1.0);
            n = std::clamp(double(view.nontumor[i]), 0.0, 1.0);
        }
        double w = alpha * std::min(t + n, 1.0);
        rgba[4 * i + 0] = std::uint8_t(std::clamp((1.0 - w) * base + 255.0 * alpha * t, 0.0, 255.0));
        rgba[4 * i + 1] = std::uint8_t(std::clamp((1.0 - w) * base, 0.0, 255.0));
        rgba[4 * i + 2] = std::uint8_t(std::clamp((1.0 - w) * base + 255.0 * alpha * n, 0.0, 255.0));
        rgba[4 * i + 3] = 255;
    }
    return png::encode_rgba8(slide.width, slide.height, rgba);
}

double mask_iou(const Heatmap& h, const Mask& mask) {
    if (mask.height != h.height || mask.width != h.width)
        throw ShapeError("mask and heatmap dimensions differ");
    const std::size_t plane = std::size_t(h.height) * h.width;
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        if (h.coverage[i] == 0) continue;
        float best = h.accum[i];
        int best_k = 0;
        for (int k = 1; k < kNumClasses; ++k)
            if (h.accum[k * plane + i] > best) {
                best = h.accum[k * plane + i];
                best_k = k;
            }
        bool pred_tumor = best_k < kNumTumorClasses;
        bool true_tumor = mask.data[i] != 0;
        inter += (pred_tumor && true_tumor);
        uni += (pred_tumor || true_tumor);
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

double tumor_detection_fraction(const Heatmap& h, const TwoChannelView& view, const Mask& mask,
                                double threshold) {
    if (mask.height != h.height || mask.width != h.width)
        throw ShapeError("mask and heatmap dimensions differ");
    const std::size_t plane = std::size_t(h.height) * h.width;
    std::size_t island = 0, detected = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        if (mask.data[i] == 0 || h.coverage[i] == 0) continue;
        ++island;
        detected += (view.tumor[i] > threshold);
    }
    return island == 0 ? 0.0 : double(detected) / double(island);
}

}  // namespace srh::segment
