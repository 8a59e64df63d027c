#include "srh/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <cblas.h>

extern "C" void openblas_set_num_threads(int);

namespace srh::nn {

void set_blas_threads(int n) {
    if (n >= 1) openblas_set_num_threads(n);
}

namespace {

inline void gemm(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate,
                 bool trans_a = false, bool trans_b = false) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, M, N, K, 1.0f, A, trans_a ? M : K, B,
                trans_b ? K : N, accumulate ? 1.0f : 0.0f, C, N);
}

inline void gemm(int M, int N, int K, const double* A, const double* B, double* C,
                 bool accumulate, bool trans_a = false, bool trans_b = false) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, M, N, K, 1.0, A, trans_a ? M : K, B,
                trans_b ? K : N, accumulate ? 1.0 : 0.0, C, N);
}

// 3x3 kernel, pad 1. col is [in_c*9][out_side*out_side].
template <typename T>
void im2col(const T* x, int in_c, int side, int stride, int out_side, T* col) {
    const int os2 = out_side * out_side;
    for (int c = 0; c < in_c; ++c) {
        const T* plane = x + std::size_t(c) * side * side;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* dst = col + (std::size_t(c) * 9 + ky * 3 + kx) * os2;
                for (int oy = 0; oy < out_side; ++oy) {
                    int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= side) {
                        std::fill(dst + oy * out_side, dst + (oy + 1) * out_side, T(0));
                        continue;
                    }
                    for (int ox = 0; ox < out_side; ++ox) {
                        int ix = ox * stride + kx - 1;
                        dst[oy * out_side + ox] =
                            (ix >= 0 && ix < side) ? plane[iy * side + ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, int in_c, int side, int stride, int out_side, T* x) {
    const int os2 = out_side * out_side;
    std::fill(x, x + std::size_t(in_c) * side * side, T(0));
    for (int c = 0; c < in_c; ++c) {
        T* plane = x + std::size_t(c) * side * side;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* src = col + (std::size_t(c) * 9 + ky * 3 + kx) * os2;
                for (int oy = 0; oy < out_side; ++oy) {
                    int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= side) continue;
                    for (int ox = 0; ox < out_side; ++ox) {
                        int ix = ox * stride + kx - 1;
                        if (ix >= 0 && ix < side) plane[iy * side + ix] += src[oy * out_side + ox];
                    }
                }
            }
        }
    }
}

inline int conv_out_side(int side, int stride) { return (side - 1) / stride + 1; }

}  // namespace

void FeatureExtractorConfig::validate() const {
    if (blocks.empty()) throw ContractError("at least one conv block required");
    if (feature_dim < projection_dim || projection_dim < 2)
        throw ContractError("require feature_dim >= projection_dim >= 2");
    if (input_side < (1 << blocks.size()))
        throw ContractError("input side too small for the block count");
}

template <typename T>
std::vector<T> l2_normalize(std::span<const T> v) {
    double norm2 = 0.0;
    for (T x : v) norm2 += double(x) * double(x);
    double norm = std::sqrt(norm2);
    if (norm <= kNormEpsilon) throw DegenerateNormError("vector norm below epsilon");
    std::vector<T> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = T(v[i] / norm);
    return out;
}

template <typename T>
T cosine_sim(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw ShapeError("cosine_sim dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * double(b[i]);
    return T(std::clamp(dot, -1.0, 1.0));
}

template <typename T>
void Grads<T>::add_scaled(const Grads& other, T scale) {
    if (tensors.size() != other.tensors.size()) throw ShapeError("grad tensor count mismatch");
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        if (tensors[t].size() != other.tensors[t].size())
            throw ShapeError("grad tensor shape mismatch");
        for (std::size_t i = 0; i < tensors[t].size(); ++i)
            tensors[t][i] += scale * other.tensors[t][i];
    }
}

template <typename T>
void Grads<T>::scale(T s) {
    for (auto& t : tensors)
        for (auto& v : t) v *= s;
}

template <typename T>
Network<T>::Network(const FeatureExtractorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    int side = cfg_.input_side;
    int in_c = cfg_.input_channels;
    block_sides_.push_back(side);
    for (const auto& b : cfg_.blocks) {
        params_.emplace_back(std::size_t(b.out_channels) * in_c * 9, T(0));  // W
        params_.emplace_back(std::size_t(b.out_channels), T(0));             // b
        side = conv_out_side(side, b.stride);
        block_sides_.push_back(side);
        in_c = b.out_channels;
    }
    params_.emplace_back(std::size_t(cfg_.feature_dim) * in_c, T(0));
    params_.emplace_back(std::size_t(cfg_.feature_dim), T(0));
    params_.emplace_back(std::size_t(cfg_.projection_dim) * cfg_.feature_dim, T(0));
    params_.emplace_back(std::size_t(cfg_.projection_dim), T(0));
    init_params(cfg_.init_seed);
}

template <typename T>
void Network<T>::init_params(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x1417));
    int in_c = cfg_.input_channels;
    // He-style uniform bounds (gain 2 before ReLU) keep activation variance
    // near 1 through the depth; a vanishing pre-normalization projection would
    // make the L2-normalize derivative ill-conditioned
    for (std::size_t b = 0; b < cfg_.blocks.size(); ++b) {
        double bound = std::sqrt(6.0 / (in_c * 9));
        for (auto& w : params_[2 * b]) w = T(rng.uniform(-bound, bound));
        std::fill(params_[2 * b + 1].begin(), params_[2 * b + 1].end(), T(0));
        in_c = cfg_.blocks[b].out_channels;
    }
    std::size_t fi = 2 * cfg_.blocks.size();
    double fb_bound = std::sqrt(6.0 / in_c);
    for (auto& w : params_[fi]) w = T(rng.uniform(-fb_bound, fb_bound));
    std::fill(params_[fi + 1].begin(), params_[fi + 1].end(), T(0));
    double pb_bound = std::sqrt(3.0 / cfg_.feature_dim);
    for (auto& w : params_[fi + 2]) w = T(rng.uniform(-pb_bound, pb_bound));
    std::fill(params_[fi + 3].begin(), params_[fi + 3].end(), T(0));
}

template <typename T>
std::size_t Network<T>::param_count() const {
    std::size_t n = 0;
    for (const auto& t : params_) n += t.size();
    return n;
}

template <typename T>
Grads<T> Network<T>::zero_grads() const {
    Grads<T> g;
    g.tensors.reserve(params_.size());
    for (const auto& t : params_) g.tensors.emplace_back(t.size(), T(0));
    return g;
}

template <typename T>
ForwardCache<T> Network<T>::forward(const Tensor4<T>& batch) const {
    if (batch.c != cfg_.input_channels || batch.h != cfg_.input_side ||
        batch.w != cfg_.input_side)
        throw ShapeError("batch shape does not match extractor config");
    const int N = batch.n;
    const int D = cfg_.feature_dim;
    const int d = cfg_.projection_dim;
    const int C_last = cfg_.last_channels();

    ForwardCache<T> cache;
    cache.batch = N;
    cache.sides = block_sides_;
    cache.block_in.resize(cfg_.blocks.size());
    cache.block_pre.resize(cfg_.blocks.size());
    cache.gap.assign(std::size_t(N) * C_last, T(0));
    cache.feat.assign(std::size_t(N) * D, T(0));
    cache.relu_feat.assign(std::size_t(N) * D, T(0));
    cache.praw.assign(std::size_t(N) * d, T(0));
    cache.proj.assign(std::size_t(N) * d, T(0));
    cache.praw_norm.assign(N, T(0));

    int in_c = cfg_.input_channels;
    cache.block_in[0] = batch.values;
    std::vector<T> col;
    for (std::size_t b = 0; b < cfg_.blocks.size(); ++b) {
        const int side = block_sides_[b];
        const int out_side = block_sides_[b + 1];
        const int out_c = cfg_.blocks[b].out_channels;
        const int os2 = out_side * out_side;
        const std::size_t in_sz = std::size_t(in_c) * side * side;
        const std::size_t out_sz = std::size_t(out_c) * os2;
        cache.block_pre[b].assign(std::size_t(N) * out_sz, T(0));
        if (b + 1 < cfg_.blocks.size())
            cache.block_in[b + 1].assign(std::size_t(N) * out_sz, T(0));
        col.resize(std::size_t(in_c) * 9 * os2);
        for (int s = 0; s < N; ++s) {
            const T* x = cache.block_in[b].data() + s * in_sz;
            T* pre = cache.block_pre[b].data() + s * out_sz;
            im2col(x, in_c, side, cfg_.blocks[b].stride, out_side, col.data());
            gemm(out_c, os2, in_c * 9, params_[2 * b].data(), col.data(), pre, false);
            for (int oc = 0; oc < out_c; ++oc) {
                T bias = params_[2 * b + 1][oc];
                for (int i = 0; i < os2; ++i) pre[oc * os2 + i] += bias;
            }
            if (b + 1 < cfg_.blocks.size()) {
                T* nxt = cache.block_in[b + 1].data() + s * out_sz;
                for (std::size_t i = 0; i < out_sz; ++i) nxt[i] = std::max(pre[i], T(0));
            } else {
                // global average pool over ReLU activations
                T* g = cache.gap.data() + std::size_t(s) * C_last;
                for (int oc = 0; oc < out_c; ++oc) {
                    T acc = T(0);
                    for (int i = 0; i < os2; ++i) acc += std::max(pre[oc * os2 + i], T(0));
                    g[oc] = acc / T(os2);
                }
            }
        }
        in_c = out_c;
    }

    const std::size_t fi = 2 * cfg_.blocks.size();
    gemm(N, D, C_last, cache.gap.data(), params_[fi].data(), cache.feat.data(), false, false,
         true);
    for (int s = 0; s < N; ++s)
        for (int i = 0; i < D; ++i) {
            T& f = cache.feat[std::size_t(s) * D + i];
            f += params_[fi + 1][i];
            cache.relu_feat[std::size_t(s) * D + i] = std::max(f, T(0));
        }

    gemm(N, d, D, cache.relu_feat.data(), params_[fi + 2].data(), cache.praw.data(), false,
         false, true);
    for (int s = 0; s < N; ++s) {
        double norm2 = 0.0;
        for (int i = 0; i < d; ++i) {
            T& p = cache.praw[std::size_t(s) * d + i];
            p += params_[fi + 3][i];
            norm2 += double(p) * double(p);
        }
        double norm = std::sqrt(norm2);
        if (norm <= kNormEpsilon)
            throw DegenerateNormError("projection norm below epsilon in forward");
        cache.praw_norm[s] = T(norm);
        for (int i = 0; i < d; ++i)
            cache.proj[std::size_t(s) * d + i] = T(cache.praw[std::size_t(s) * d + i] / norm);
    }
    return cache;
}

template <typename T>
Grads<T> Network<T>::backward(const ForwardCache<T>& cache, const Tensor4<T>& batch,
                              std::span<const T> d_proj, std::span<const T> d_feat) const {
    const int N = batch.n;
    if (cache.batch != N) throw StateError("forward cache does not match batch");
    const int D = cfg_.feature_dim;
    const int d = cfg_.projection_dim;
    const int C_last = cfg_.last_channels();
    if (!d_proj.empty() && d_proj.size() != std::size_t(N) * d)
        throw ShapeError("d_proj shape mismatch");
    if (!d_feat.empty() && d_feat.size() != std::size_t(N) * D)
        throw ShapeError("d_feat shape mismatch");

    Grads<T> grads = zero_grads();
    const std::size_t fi = 2 * cfg_.blocks.size();

    // projection head: unit-normalization jacobian, then dense
    std::vector<T> d_praw(std::size_t(N) * d, T(0));
    if (!d_proj.empty()) {
        for (int s = 0; s < N; ++s) {
            const T* z = cache.proj.data() + std::size_t(s) * d;
            const T* dz = d_proj.data() + std::size_t(s) * d;
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += double(z[i]) * double(dz[i]);
            for (int i = 0; i < d; ++i)
                d_praw[std::size_t(s) * d + i] =
                    T((double(dz[i]) - dot * double(z[i])) / double(cache.praw_norm[s]));
        }
    }

    std::vector<T> d_relu_feat(std::size_t(N) * D, T(0));
    if (!d_proj.empty()) {
        // dPW = d_praw^T . relu_feat ; d_relu_feat = d_praw . PW
        gemm(d, D, N, d_praw.data(), cache.relu_feat.data(), grads.tensors[fi + 2].data(), false,
             true, false);
        for (int s = 0; s < N; ++s)
            for (int i = 0; i < d; ++i) grads.tensors[fi + 3][i] += d_praw[std::size_t(s) * d + i];
        gemm(N, D, d, d_praw.data(), params_[fi + 2].data(), d_relu_feat.data(), false);
    }

    std::vector<T> d_feat_total(std::size_t(N) * D, T(0));
    for (int s = 0; s < N; ++s)
        for (int i = 0; i < D; ++i) {
            std::size_t idx = std::size_t(s) * D + i;
            // both upstream gradients are w.r.t. the post-ReLU features, so
            // the ReLU mask applies to the external d_feat as well
            T g = d_relu_feat[idx];
            if (!d_feat.empty()) g += d_feat[idx];
            d_feat_total[idx] = cache.feat[idx] > T(0) ? g : T(0);
        }

    gemm(D, C_last, N, d_feat_total.data(), cache.gap.data(), grads.tensors[fi].data(), false,
         true, false);
    for (int s = 0; s < N; ++s)
        for (int i = 0; i < D; ++i) grads.tensors[fi + 1][i] += d_feat_total[std::size_t(s) * D + i];

    std::vector<T> d_gap(std::size_t(N) * C_last, T(0));
    gemm(N, C_last, D, d_feat_total.data(), params_[fi].data(), d_gap.data(), false);

    // conv blocks, reversed
    const int B = int(cfg_.blocks.size());
    std::vector<T> d_act;  // gradient w.r.t. a block's ReLU output
    std::vector<T> col, d_col;
    for (int b = B - 1; b >= 0; --b) {
        const int side = block_sides_[b];
        const int out_side = block_sides_[b + 1];
        const int out_c = cfg_.blocks[b].out_channels;
        const int in_c = b == 0 ? cfg_.input_channels : cfg_.blocks[b - 1].out_channels;
        const int os2 = out_side * out_side;
        const std::size_t in_sz = std::size_t(in_c) * side * side;
        const std::size_t out_sz = std::size_t(out_c) * os2;

        std::vector<T> d_in(b > 0 ? std::size_t(N) * in_sz : 0, T(0));
        col.resize(std::size_t(in_c) * 9 * os2);
        d_col.resize(col.size());
        for (int s = 0; s < N; ++s) {
            const T* pre = cache.block_pre[b].data() + s * out_sz;
            std::vector<T> d_pre(out_sz);
            if (b == B - 1) {
                const T* dg = d_gap.data() + std::size_t(s) * C_last;
                for (int oc = 0; oc < out_c; ++oc) {
                    T g = dg[oc] / T(os2);
                    for (int i = 0; i < os2; ++i)
                        d_pre[oc * os2 + i] = pre[oc * os2 + i] > T(0) ? g : T(0);
                }
            } else {
                const T* da = d_act.data() + s * out_sz;
                for (std::size_t i = 0; i < out_sz; ++i)
                    d_pre[i] = pre[i] > T(0) ? da[i] : T(0);
            }

            const T* x = cache.block_in[b].data() + s * in_sz;
            im2col(x, in_c, side, cfg_.blocks[b].stride, out_side, col.data());
            // dW += d_pre . col^T
            gemm(out_c, in_c * 9, os2, d_pre.data(), col.data(), grads.tensors[2 * b].data(),
                 true, false, true);
            for (int oc = 0; oc < out_c; ++oc) {
                T acc = T(0);
                for (int i = 0; i < os2; ++i) acc += d_pre[oc * os2 + i];
                grads.tensors[2 * b + 1][oc] += acc;
            }
            if (b > 0) {
                // d_col = W^T . d_pre, then scatter back
                gemm(in_c * 9, os2, out_c, params_[2 * b].data(), d_pre.data(), d_col.data(),
                     false, true, false);
                col2im(d_col.data(), in_c, side, cfg_.blocks[b].stride, out_side,
                       d_in.data() + s * in_sz);
            }
        }
        d_act = std::move(d_in);
    }
    return grads;
}

GradCheckReport grad_check(Network<double>& net,
                           const std::function<double(const Network<double>&)>& loss_value,
                           const Grads<double>& analytic, double h, int samples_per_tensor,
                           std::uint64_t seed) {
    GradCheckReport report;
    Rng rng(mix_seed(seed, 0x9c));
    auto& params = net.params();
    for (std::size_t t = 0; t < params.size(); ++t) {
        const std::size_t n = params[t].size();
        const int samples = int(std::min<std::size_t>(samples_per_tensor, n));
        for (int s = 0; s < samples; ++s) {
            std::size_t i = n <= std::size_t(samples_per_tensor)
                                ? std::size_t(s)
                                : std::size_t(rng.next_below(n));
            const double orig = params[t][i];
            params[t][i] = orig + h;
            double lp = loss_value(net);
            params[t][i] = orig - h;
            double lm = loss_value(net);
            double fd = (lp - lm) / (2.0 * h);
            params[t][i] = orig + 0.5 * h;
            double lp2 = loss_value(net);
            params[t][i] = orig - 0.5 * h;
            double lm2 = loss_value(net);
            params[t][i] = orig;
            double fd2 = (lp2 - lm2) / h;
            // a ReLU kink inside [-h, h] makes both quotients one-sided
            // garbage and h-dependent; skip coordinates where halving the
            // step moves the estimate, since the difference there is FD
            // error, not gradient error
            double fd_drift = std::abs(fd - fd2) / std::max({std::abs(fd), std::abs(fd2), 1e-6});
            if (fd_drift > 1e-5) continue;
            double ga = analytic.tensors[t][i];
            // floor the denominator at 1e-6: below that the comparison is
            // absolute, since central differences carry ~1e-10 rounding noise
            double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-6});
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_tensor = "tensor_" + std::to_string(t);
            }
            ++report.coordinates_checked;
        }
    }
    return report;
}

template class Network<float>;
template class Network<double>;
template struct Grads<float>;
template struct Grads<double>;
template std::vector<float> l2_normalize<float>(std::span<const float>);
template std::vector<double> l2_normalize<double>(std::span<const double>);
template float cosine_sim<float>(std::span<const float>, std::span<const float>);
template double cosine_sim<double>(std::span<const double>, std::span<const double>);

}  // namespace srh::nn
