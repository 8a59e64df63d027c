#include "srh/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace srh::objectives {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("embedding dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Shared core: per-anchor positive index sets over an M x M similarity
// structure where the denominator for anchor i is every row j != i.
// Returns mean loss over anchors and the coefficient matrix C with
// C[i][j] = dL/ds_ij for anchor i; d_proj = (C + C^T) Z.
template <typename T>
BatchLossGrad<T> anchor_set_loss(std::span<const T> Z, int M, int dim,
                                 const std::vector<std::vector<int>>& positives, double tau) {
    if (tau <= 0.0) throw ContractError("temperature must be positive");
    std::vector<double> sims(std::size_t(M) * M, 0.0);
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k)
                s += double(Z[std::size_t(i) * dim + k]) * double(Z[std::size_t(j) * dim + k]);
            sims[std::size_t(i) * M + j] = sims[std::size_t(j) * M + i] = s;
        }

    std::vector<double> coeff(std::size_t(M) * M, 0.0);
    double total = 0.0;
    for (int i = 0; i < M; ++i) {
        const auto& pos = positives[i];
        if (pos.empty()) throw ContractError("anchor without a positive");
        // log-sum-exp over j != i with max subtraction
        double mx = -1e300;
        for (int j = 0; j < M; ++j)
            if (j != i) mx = std::max(mx, sims[std::size_t(i) * M + j] / tau);
        double sum = 0.0;
        for (int j = 0; j < M; ++j)
            if (j != i) sum += std::exp(sims[std::size_t(i) * M + j] / tau - mx);
        double lse = mx + std::log(sum);

        double anchor_loss = 0.0;
        for (int p : pos) anchor_loss += -sims[std::size_t(i) * M + p] / tau + lse;
        anchor_loss /= double(pos.size());
        total += anchor_loss;

        const double inv = 1.0 / (double(M) * tau);
        for (int j = 0; j < M; ++j) {
            if (j == i) continue;
            double w = std::exp(sims[std::size_t(i) * M + j] / tau - mx) / sum;
            coeff[std::size_t(i) * M + j] = w * inv;
        }
        for (int p : pos) coeff[std::size_t(i) * M + p] -= inv / double(pos.size());
    }

    BatchLossGrad<T> out;
    out.loss = total / double(M);
    out.d_proj.assign(std::size_t(M) * dim, T(0));
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            double c = coeff[std::size_t(i) * M + j] + coeff[std::size_t(j) * M + i];
            if (c == 0.0) continue;
            for (int k = 0; k < dim; ++k)
                out.d_proj[std::size_t(i) * dim + k] +=
                    T(c * double(Z[std::size_t(j) * dim + k]));
        }
    return out;
}

}  // namespace

double contrastive_loss(std::span<const double> z,
                        const std::vector<std::vector<double>>& positives,
                        const std::vector<std::vector<double>>& denominator_set, double tau) {
    if (positives.empty()) throw ContractError("positives must be nonempty");
    if (tau <= 0.0) throw ContractError("temperature must be positive");
    if (denominator_set.size() < positives.size())
        throw ContractError("denominator set must contain the positives");

    double mx = -1e300;
    std::vector<double> dsims;
    dsims.reserve(denominator_set.size());
    for (const auto& n : denominator_set) {
        double s = dot(z, n) / tau;
        dsims.push_back(s);
        mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (double s : dsims) sum += std::exp(s - mx);
    double lse = mx + std::log(sum);

    double total = 0.0;
    for (const auto& p : positives) total += -dot(z, p) / tau + lse;
    return total / double(positives.size());
}

template <typename T>
BatchLossGrad<T> simclr_loss_grad(std::span<const T> projections, int rows, int dim,
                                  double tau) {
    if (rows < 4 || rows % 2 != 0)
        throw ContractError("simclr needs an even number of views from >= 2 images");
    std::vector<std::vector<int>> positives(rows);
    for (int i = 0; i < rows; ++i) positives[i] = {i ^ 1};  // sibling view
    return anchor_set_loss(projections, rows, dim, positives, tau);
}

template <typename T>
BatchLossGrad<T> supcon_loss_grad(std::span<const T> projections, int rows, int dim,
                                  std::span<const int> labels, double tau) {
    if (rows < 2) throw ContractError("supcon needs at least 2 samples");
    if (int(labels.size()) != rows) throw ShapeError("labels length mismatch");
    std::vector<std::vector<int>> positives(rows);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < rows; ++j)
            if (j != i && labels[j] == labels[i]) positives[i].push_back(j);
        if (positives[i].empty())
            throw ContractError("class with a single batch member; sampler must emit >= 2");
    }
    return anchor_set_loss(projections, rows, dim, positives, tau);
}

double cross_entropy_loss(std::span<const double> prob_dist, int label) {
    if (label < 0 || std::size_t(label) >= prob_dist.size())
        throw ContractError("label out of range");
    return -std::log(std::max(prob_dist[label], 1e-12));
}

template <typename T>
SoftmaxCE<T> softmax_cross_entropy(std::span<const T> logits, int rows, int classes,
                                   std::span<const int> labels) {
    if (logits.size() != std::size_t(rows) * classes) throw ShapeError("logits shape mismatch");
    if (int(labels.size()) != rows) throw ShapeError("labels length mismatch");
    SoftmaxCE<T> out;
    out.probs.assign(logits.size(), T(0));
    out.d_logits.assign(logits.size(), T(0));
    double total = 0.0;
    for (int r = 0; r < rows; ++r) {
        const T* x = logits.data() + std::size_t(r) * classes;
        double mx = double(*std::max_element(x, x + classes));
        double sum = 0.0;
        for (int k = 0; k < classes; ++k) sum += std::exp(double(x[k]) - mx);
        for (int k = 0; k < classes; ++k) {
            double p = std::exp(double(x[k]) - mx) / sum;
            out.probs[std::size_t(r) * classes + k] = T(p);
            out.d_logits[std::size_t(r) * classes + k] =
                T((p - (k == labels[r] ? 1.0 : 0.0)) / double(rows));
        }
        total += -std::log(std::max(double(out.probs[std::size_t(r) * classes + labels[r]]), 1e-12));
    }
    out.loss = total / double(rows);
    return out;
}

nn::Tensor4<float> patches_to_batch(const std::vector<preprocess::Patch>& patches,
                                    const preprocess::ChannelStats& stats) {
    if (patches.empty()) throw ContractError("empty patch batch");
    const int side = int(patches[0].side);
    nn::Tensor4<float> batch(int(patches.size()), 3, side, side);
    const std::size_t plane = std::size_t(side) * side;
    for (std::size_t s = 0; s < patches.size(); ++s) {
        if (int(patches[s].side) != side) throw ShapeError("mixed patch sides in batch");
        for (int c = 0; c < 3; ++c) {
            const float* src = patches[s].pixels.data() + c * plane;
            float* dst = batch.values.data() + (s * 3 + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = stats.apply(c, src[i]);
        }
    }
    return batch;
}

double simclr_batch_loss(const nn::Network<float>& net,
                         const std::vector<preprocess::Patch>& batch,
                         const preprocess::ChannelStats& stats, double tau,
                         std::uint64_t rng_seed, const preprocess::AugmentationSpec& aug) {
    if (batch.size() < 2) throw ContractError("simclr needs at least 2 images");
    std::vector<preprocess::Patch> views;
    views.reserve(2 * batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto [a, b] = preprocess::augment_pair(batch[i], mix_seed(rng_seed, i), aug);
        views.push_back(std::move(a));
        views.push_back(std::move(b));
    }
    auto cache = net.forward(patches_to_batch(views, stats));
    return simclr_loss_grad<float>(cache.proj, int(views.size()), net.config().projection_dim,
                                   tau)
        .loss;
}

double supcon_batch_loss(const nn::Network<float>& net,
                         const std::vector<preprocess::Patch>& batch,
                         const preprocess::ChannelStats& stats, double tau) {
    auto cache = net.forward(patches_to_batch(batch, stats));
    std::vector<int> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = int(batch[i].label);
    return supcon_loss_grad<float>(cache.proj, int(batch.size()), net.config().projection_dim,
                                   labels, tau)
        .loss;
}

template struct BatchLossGrad<float>;
template struct BatchLossGrad<double>;
template BatchLossGrad<float> simclr_loss_grad<float>(std::span<const float>, int, int, double);
template BatchLossGrad<double> simclr_loss_grad<double>(std::span<const double>, int, int,
                                                        double);
template BatchLossGrad<float> supcon_loss_grad<float>(std::span<const float>, int, int,
                                                      std::span<const int>, double);
template BatchLossGrad<double> supcon_loss_grad<double>(std::span<const double>, int, int,
                                                        std::span<const int>, double);
template SoftmaxCE<float> softmax_cross_entropy<float>(std::span<const float>, int, int,
                                                       std::span<const int>);
template SoftmaxCE<double> softmax_cross_entropy<double>(std::span<const double>, int, int,
                                                         std::span<const int>);

}  // namespace srh::objectives
