#pragma once

#include <cstdint>
#include <vector>

#include "srh/common.hpp"
#include "srh/evaluate.hpp"
#include "srh/image.hpp"
#include "srh/trainer.hpp"

namespace srh::segment {

// Per-pixel accumulation of class probabilities from overlapping patch
// predictions. Covered pixels divide by their coverage count to give a
// valid distribution; uncovered pixels stay flagged.
struct Heatmap {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<float> accum;           // kNumClasses planes, h*w each
    std::vector<std::uint32_t> coverage;
    eval::ProbDist slide_aggregate;     // soft aggregate of patch distributions
    std::uint32_t patch_side = 0;
    std::uint32_t stride = 0;

    bool covered(std::uint32_t r, std::uint32_t c) const {
        return coverage[std::size_t(r) * width + c] > 0;
    }
    eval::ProbDist prob_at(std::uint32_t r, std::uint32_t c) const;
    double coverage_fraction() const;
};

// Each covered pixel's distribution = mean of the ProbDists of all patches
// covering it. stride <= patch_side; the default patch_side/3 gives the
// overlap that smooths the map.
Heatmap probability_heatmap(const Image3& slide, const train::Checkpoint& ckpt,
                            std::uint32_t patch_side, std::uint32_t stride, int batch_size = 64);

struct TwoChannelView {
    std::vector<float> tumor;     // per-pixel probability of tumor_class
    std::vector<float> nontumor;  // per-pixel probability of nontumor_class
    ClassLabel tumor_class = ClassLabel::PituitaryAdenoma;
    ClassLabel nontumor_class = ClassLabel::Nondiagnostic;
};

// tumor_class / nontumor_class = argmax of the slide-level aggregate over the
// tumor / nontumor label subsets.
TwoChannelView two_channel_view(const Heatmap& h);

// red = tumor channel, blue = nontumor channel, alpha-blended over the
// grayscale base; 8-bit RGBA PNG bytes. Uncovered pixels render as plain base.
std::vector<std::uint8_t> render_overlay(const Image3& slide, const Heatmap& h,
                                         const TwoChannelView& view, double alpha);

// tumor-vs-nontumor argmax against a ground-truth mask
double mask_iou(const Heatmap& h, const Mask& mask);

// fraction of mask pixels whose tumor-class probability exceeds `threshold`
double tumor_detection_fraction(const Heatmap& h, const TwoChannelView& view, const Mask& mask,
                                double threshold);

}  // namespace srh::segment
