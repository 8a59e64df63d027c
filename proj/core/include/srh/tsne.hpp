#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srh/common.hpp"
#include "srh/preprocess.hpp"
#include "srh/trainer.hpp"

namespace srh::embed {

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;     // momentum also switches 0.5 -> 0.8 here
    std::uint64_t seed = 1;
    double entropy_tolerance = 1e-5;  // bits, per point
};

struct TsneResult {
    std::vector<double> coords;  // N x 2
    double kl_initial = 0.0;     // against the non-exaggerated P, at iteration 0
    double kl_final = 0.0;
    std::vector<double> sigma;   // bandwidth found per point
};

// Exact O(N^2) tSNE. Per-point sigma is found by bisection so the conditional
// distribution's entropy matches log2(perplexity) within entropy_tolerance;
// the symmetrized P sums to 1. Gradient descent with momentum. Deterministic
// under a fixed seed; initialization is seeded per point from the point's
// feature content, making the output permutation-equivariant.
TsneResult tsne(const std::vector<double>& features, int count, int dim,
                const TsneConfig& config);

// For tests: the symmetrized affinity matrix and per-point sigmas alone.
struct Affinities {
    std::vector<double> p;  // N x N, symmetric, sums to 1
    std::vector<double> sigma;
    std::vector<double> entropy_bits;  // achieved conditional entropy per point
};
Affinities compute_affinities(const std::vector<double>& features, int count, int dim,
                              double perplexity, double tolerance = 1e-5);

// Feature-space embeddings (pre-projection, dimension D) with labels retained
// for coloring. use_projection switches to the d-dimensional head output.
struct EmbeddingMatrix {
    int count = 0;
    int dim = 0;
    std::vector<double> features;  // count x dim
    std::vector<ClassLabel> labels;
};
EmbeddingMatrix extract_embeddings(const train::Checkpoint& ckpt,
                                   const std::vector<preprocess::Patch>& patches,
                                   bool use_projection = false);

// Header "x,y,label", one row per point, deterministic ordering.
std::string export_scatter(const std::vector<double>& coords,
                           const std::vector<ClassLabel>& labels);

}  // namespace srh::embed
