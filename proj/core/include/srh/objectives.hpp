#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "srh/common.hpp"
#include "srh/net.hpp"
#include "srh/preprocess.hpp"

namespace srh::objectives {

// General contrastive kernel over unit embeddings:
//   mean over positives p of
//     -log( exp(sim(z,p)/tau) / sum over denominator n of exp(sim(z,n)/tau) )
// The denominator set must contain the positives (nonnegativity follows);
// computed with max-subtraction.
double contrastive_loss(std::span<const double> z,
                        const std::vector<std::vector<double>>& positives,
                        const std::vector<std::vector<double>>& denominator_set, double tau);

// Loss plus analytic gradient w.r.t. the stacked unit projections.
template <typename T>
struct BatchLossGrad {
    double loss = 0.0;
    std::vector<T> d_proj;  // M x dim
};

// Self-supervised (SimCLR-style) loss over 2N stacked views where rows
// (2i, 2i+1) are sibling views of one image. Positive = sibling, denominator
// = the 2N-1 other views; mean over the 2N anchors.
template <typename T>
BatchLossGrad<T> simclr_loss_grad(std::span<const T> projections, int rows, int dim, double tau);

// Supervised contrastive loss: positives = same-class others, denominator =
// all other batch rows, mean of per-positive losses per anchor ("L_out"),
// then mean over anchors. Every class in the batch needs >= 2 members.
template <typename T>
BatchLossGrad<T> supcon_loss_grad(std::span<const T> projections, int rows, int dim,
                                  std::span<const int> labels, double tau);

// -log p[label] with p clipped below at 1e-12.
double cross_entropy_loss(std::span<const double> prob_dist, int label);

template <typename T>
struct SoftmaxCE {
    double loss = 0.0;          // mean over batch rows
    std::vector<T> probs;       // N x K
    std::vector<T> d_logits;    // N x K, gradient of the mean loss
};

template <typename T>
SoftmaxCE<T> softmax_cross_entropy(std::span<const T> logits, int rows, int classes,
                                   std::span<const int> labels);

// Whole-batch objective values on real patches through the extractor;
// spec-level wrappers over the *_loss_grad kernels.
double simclr_batch_loss(const nn::Network<float>& net,
                         const std::vector<preprocess::Patch>& batch,
                         const preprocess::ChannelStats& stats, double tau,
                         std::uint64_t rng_seed,
                         const preprocess::AugmentationSpec& aug = {});

double supcon_batch_loss(const nn::Network<float>& net,
                         const std::vector<preprocess::Patch>& batch,
                         const preprocess::ChannelStats& stats, double tau);

// Standardizes patches into an NCHW batch tensor.
nn::Tensor4<float> patches_to_batch(const std::vector<preprocess::Patch>& patches,
                                    const preprocess::ChannelStats& stats);

}  // namespace srh::objectives
