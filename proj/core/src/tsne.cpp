#include "srh/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace srh::embed {

namespace {

// conditional p_{j|i} for a given beta = 1/(2 sigma^2); returns entropy in bits
double fill_row(const std::vector<double>& d2, int count, int i, double beta,
                std::vector<double>& row) {
    double sum = 0.0;
    for (int j = 0; j < count; ++j) {
        if (j == i) {
            row[j] = 0.0;
            continue;
        }
        row[j] = std::exp(-beta * d2[std::size_t(i) * count + j]);
        sum += row[j];
    }
    if (sum <= 0.0) return 0.0;
    double h_nats = 0.0;
    for (int j = 0; j < count; ++j) {
        if (j == i) continue;
        row[j] /= sum;
        if (row[j] > 1e-300) h_nats -= row[j] * std::log(row[j]);
    }
    return h_nats / std::log(2.0);
}

}  // namespace

Affinities compute_affinities(const std::vector<double>& features, int count, int dim,
                              double perplexity, double tolerance) {
    if (count < 2) throw ContractError("need at least 2 points");
    if (!(perplexity > 1.0 && perplexity < (count - 1) / 3.0))
        throw ContractError("perplexity must satisfy 1 < perplexity < (N-1)/3");

    // pairwise squared distances
    std::vector<double> d2(std::size_t(count) * count, 0.0);
    double max_d2 = 0.0;
    for (int i = 0; i < count; ++i)
        for (int j = i + 1; j < count; ++j) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k) {
                double diff = features[std::size_t(i) * dim + k] -
                              features[std::size_t(j) * dim + k];
                s += diff * diff;
            }
            d2[std::size_t(i) * count + j] = d2[std::size_t(j) * count + i] = s;
            max_d2 = std::max(max_d2, s);
        }
    if (max_d2 <= 0.0) throw DegeneracyError("all tsne input points are identical");

    const double target = std::log2(perplexity);
    Affinities out;
    out.p.assign(std::size_t(count) * count, 0.0);
    out.sigma.resize(count);
    out.entropy_bits.resize(count);

    std::vector<double> row(count);
    std::vector<double> cond(std::size_t(count) * count, 0.0);
    for (int i = 0; i < count; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        double entropy = 0.0;
        for (int iter = 0; iter < 256; ++iter) {
            entropy = fill_row(d2, count, i, beta, row);
            double diff = entropy - target;
            if (std::abs(diff) < tolerance) break;
            if (diff > 0.0) {  // entropy too high -> sharpen (raise beta)
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = 0.5 * (beta + beta_lo);
            }
        }
        out.sigma[i] = std::sqrt(1.0 / (2.0 * beta));
        out.entropy_bits[i] = entropy;
        for (int j = 0; j < count; ++j) cond[std::size_t(i) * count + j] = row[j];
    }

    // symmetrize; sums to 1 by construction
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < count; ++j)
            out.p[std::size_t(i) * count + j] =
                std::max((cond[std::size_t(i) * count + j] + cond[std::size_t(j) * count + i]) /
                             (2.0 * count),
                         1e-12 / count);
    return out;
}

TsneResult tsne(const std::vector<double>& features, int count, int dim,
                const TsneConfig& config) {
    if (count < 10) throw ContractError("tsne requires at least 10 points");
    if (int(features.size()) != count * dim) throw ShapeError("feature matrix shape mismatch");

    Affinities aff =
        compute_affinities(features, count, dim, config.perplexity, config.entropy_tolerance);

    TsneResult result;
    result.sigma = aff.sigma;

    // per-point seeding from the feature content keeps the embedding
    // permutation-equivariant
    std::vector<double> y(std::size_t(count) * 2);
    for (int i = 0; i < count; ++i) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (int k = 0; k < dim; ++k) {
            std::uint64_t bits;
            double v = features[std::size_t(i) * dim + k];
            std::memcpy(&bits, &v, 8);
            h = (h ^ bits) * 0x100000001b3ULL;
        }
        Rng rng(mix_seed(config.seed, h));
        y[std::size_t(i) * 2] = 1e-4 * rng.normal();
        y[std::size_t(i) * 2 + 1] = 1e-4 * rng.normal();
    }

    const std::size_t n2 = std::size_t(count) * count;
    std::vector<double> q(n2), num(n2);
    auto compute_q = [&]() {
        double sum = 0.0;
        for (int i = 0; i < count; ++i) {
            num[std::size_t(i) * count + i] = 0.0;
            for (int j = i + 1; j < count; ++j) {
                double dy0 = y[std::size_t(i) * 2] - y[std::size_t(j) * 2];
                double dy1 = y[std::size_t(i) * 2 + 1] - y[std::size_t(j) * 2 + 1];
                double t = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                num[std::size_t(i) * count + j] = num[std::size_t(j) * count + i] = t;
                sum += 2.0 * t;
            }
        }
        for (std::size_t k = 0; k < n2; ++k) q[k] = std::max(num[k] / sum, 1e-12);
    };
    auto kl_divergence = [&]() {
        double kl = 0.0;
        for (int i = 0; i < count; ++i)
            for (int j = 0; j < count; ++j) {
                if (i == j) continue;
                double p = aff.p[std::size_t(i) * count + j];
                kl += p * std::log(p / q[std::size_t(i) * count + j]);
            }
        return kl;
    };

    compute_q();
    result.kl_initial = kl_divergence();

    std::vector<double> velocity(std::size_t(count) * 2, 0.0);
    std::vector<double> grad(std::size_t(count) * 2);
    for (int iter = 0; iter < config.iterations; ++iter) {
        const bool exaggerate = iter < config.exaggeration_iters;
        const double ex = exaggerate ? config.early_exaggeration : 1.0;
        const double momentum = exaggerate ? 0.5 : 0.8;

        compute_q();
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < count; ++j) {
                if (i == j) continue;
                std::size_t ij = std::size_t(i) * count + j;
                double coef = 4.0 * (ex * aff.p[ij] - q[ij]) * num[ij];
                grad[std::size_t(i) * 2] += coef * (y[std::size_t(i) * 2] - y[std::size_t(j) * 2]);
                grad[std::size_t(i) * 2 + 1] +=
                    coef * (y[std::size_t(i) * 2 + 1] - y[std::size_t(j) * 2 + 1]);
            }
        }
        for (std::size_t k = 0; k < velocity.size(); ++k) {
            velocity[k] = momentum * velocity[k] - config.learning_rate * grad[k];
            y[k] += velocity[k];
        }
        // recenter
        double m0 = 0.0, m1 = 0.0;
        for (int i = 0; i < count; ++i) {
            m0 += y[std::size_t(i) * 2];
            m1 += y[std::size_t(i) * 2 + 1];
        }
        m0 /= count;
        m1 /= count;
        for (int i = 0; i < count; ++i) {
            y[std::size_t(i) * 2] -= m0;
            y[std::size_t(i) * 2 + 1] -= m1;
        }
    }

    compute_q();
    result.kl_final = kl_divergence();
    result.coords = std::move(y);
    return result;
}

EmbeddingMatrix extract_embeddings(const train::Checkpoint& ckpt,
                                   const std::vector<preprocess::Patch>& patches,
                                   bool use_projection) {
    auto net = ckpt.make_network();
    auto emb = train::extract_features(net, ckpt.stats, patches);
    EmbeddingMatrix out;
    out.count = emb.count;
    out.dim = use_projection ? emb.projection_dim : emb.feature_dim;
    const auto& src = use_projection ? emb.projections : emb.features;
    out.features.assign(src.begin(), src.end());
    out.labels.reserve(patches.size());
    for (const auto& p : patches) out.labels.push_back(p.label);
    for (double v : out.features)
        if (!std::isfinite(v)) throw Error("non-finite embedding value");
    return out;
}

std::string export_scatter(const std::vector<double>& coords,
                           const std::vector<ClassLabel>& labels) {
    if (coords.size() != labels.size() * 2) throw ShapeError("coords/labels length mismatch");
    std::ostringstream out;
    out.precision(9);
    out << "x,y,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out << coords[2 * i] << "," << coords[2 * i + 1] << "," << class_name(labels[i]) << "\n";
    return out.str();
}

}  // namespace srh::embed
