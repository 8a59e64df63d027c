#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "srh/common.hpp"
#include "srh/tensor.hpp"

namespace srh::nn {

inline constexpr double kNormEpsilon = 1e-8;

// v / ||v||_2; throws DegenerateNormError below kNormEpsilon.
template <typename T>
std::vector<T> l2_normalize(std::span<const T> v);

// dot product of unit vectors; in [-1, 1]
template <typename T>
T cosine_sim(std::span<const T> a, std::span<const T> b);

struct ConvBlockSpec {
    int out_channels = 0;
    int stride = 2;  // 3x3 kernel, pad 1

    bool operator==(const ConvBlockSpec&) const = default;
};

struct FeatureExtractorConfig {
    int input_side = 64;
    int input_channels = 3;
    std::vector<ConvBlockSpec> blocks = {{16, 2}, {32, 2}, {64, 2}, {128, 2}};
    int feature_dim = 128;     // D
    int projection_dim = 32;   // d
    std::uint64_t init_seed = 1;

    bool operator==(const FeatureExtractorConfig&) const = default;

    void validate() const;
    int last_channels() const { return blocks.empty() ? input_channels : blocks.back().out_channels; }
};

// Activations cached by forward, consumed by backward.
template <typename T>
struct ForwardCache {
    int batch = 0;
    std::vector<int> sides;                  // spatial side per block boundary
    std::vector<std::vector<T>> block_in;    // input of each conv block, N x C x S x S
    std::vector<std::vector<T>> block_pre;   // pre-ReLU conv output per block
    std::vector<T> gap;                      // N x C_last
    std::vector<T> feat;                     // N x D (linear features)
    std::vector<T> relu_feat;                // N x D
    std::vector<T> praw;                     // N x d, pre-normalization
    std::vector<T> proj;                     // N x d, unit rows
    std::vector<T> praw_norm;                // N
};

// Parameter gradients; tensors mirror Network::params() ordering.
template <typename T>
struct Grads {
    std::vector<std::vector<T>> tensors;

    void add_scaled(const Grads& other, T scale);
    void scale(T s);
};

// Small convolutional feature extractor: stride-2 3x3 conv blocks with ReLU,
// global average pooling, a linear feature layer (dimension D) and a ReLU +
// linear projection head (dimension d) normalized onto the unit hypersphere.
template <typename T>
class Network {
public:
    explicit Network(const FeatureExtractorConfig& cfg);

    const FeatureExtractorConfig& config() const { return cfg_; }

    // fan-in-scaled uniform weights, zero biases, deterministic in the seed
    void init_params(std::uint64_t seed);

    // Parameter tensor order: per block (W, b), then feature (W, b),
    // then projection (W, b).
    std::vector<std::vector<T>>& params() { return params_; }
    const std::vector<std::vector<T>>& params() const { return params_; }
    std::size_t param_count() const;

    Grads<T> zero_grads() const;

    // batch.values laid out N x 3 x S x S
    ForwardCache<T> forward(const Tensor4<T>& batch) const;

    // d_proj: N x d gradient w.r.t. the unit projections (may be empty);
    // d_feat: N x D gradient w.r.t. the linear features (may be empty).
    // Returns gradients for every trainable parameter.
    Grads<T> backward(const ForwardCache<T>& cache, const Tensor4<T>& batch,
                      std::span<const T> d_proj, std::span<const T> d_feat) const;

    template <typename U>
    Network<U> cast() const {
        Network<U> out(cfg_);
        for (std::size_t t = 0; t < params_.size(); ++t)
            for (std::size_t i = 0; i < params_[t].size(); ++i)
                out.params()[t][i] = static_cast<U>(params_[t][i]);
        return out;
    }

private:
    FeatureExtractorConfig cfg_;
    std::vector<std::vector<T>> params_;
    std::vector<int> block_sides_;  // spatial side entering each block + final
};

// Caps BLAS worker threads (1 = fully deterministic reductions).
void set_blas_threads(int n);

struct GradCheckReport {
    double max_rel_error = 0.0;
    int coordinates_checked = 0;
    std::string worst_tensor;
};

// Central finite differences (step h) against analytic gradients on a random
// coordinate subsample (samples_per_tensor per parameter tensor). Double
// precision only.
GradCheckReport grad_check(Network<double>& net,
                           const std::function<double(const Network<double>&)>& loss_value,
                           const Grads<double>& analytic, double h = 1e-5,
                           int samples_per_tensor = 200, std::uint64_t seed = 7);

extern template class Network<float>;
extern template class Network<double>;
extern template std::vector<float> l2_normalize<float>(std::span<const float>);
extern template std::vector<double> l2_normalize<double>(std::span<const double>);
extern template float cosine_sim<float>(std::span<const float>, std::span<const float>);
extern template double cosine_sim<double>(std::span<const double>, std::span<const double>);

}  // namespace srh::nn
