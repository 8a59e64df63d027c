#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <sstream>

#include "srh/tsne.hpp"
#include "test_util.hpp"

using namespace srh;

namespace {

// three well-separated gaussian clusters in dim dimensions:
// inter-center distance 10x the within-cluster std
std::vector<double> cluster_data(int per_cluster, int dim, std::vector<ClassLabel>* labels,
                                 std::uint64_t seed = 3) {
    Rng rng(seed);
    std::vector<double> out;
    const double spread = 1.0, separation = 10.0;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per_cluster; ++i) {
            for (int d = 0; d < dim; ++d) {
                double center = (d == c) ? separation : 0.0;
                out.push_back(center + spread * rng.normal());
            }
            if (labels) labels->push_back(static_cast<ClassLabel>(c));
        }
    return out;
}

double silhouette(const std::vector<double>& coords, const std::vector<ClassLabel>& labels) {
    const int n = int(labels.size());
    auto dist = [&](int i, int j) {
        double dx = coords[2 * i] - coords[2 * j], dy = coords[2 * i + 1] - coords[2 * j + 1];
        return std::sqrt(dx * dx + dy * dy);
    };
    double total = 0;
    for (int i = 0; i < n; ++i) {
        double a = 0, a_count = 0;
        std::array<double, 8> b_sum{};
        std::array<int, 8> b_count{};
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (labels[j] == labels[i]) {
                a += dist(i, j);
                ++a_count;
            } else {
                b_sum[int(labels[j])] += dist(i, j);
                ++b_count[int(labels[j])];
            }
        }
        a /= a_count;
        double b = 1e300;
        for (int k = 0; k < 8; ++k)
            if (b_count[k]) b = std::min(b, b_sum[k] / b_count[k]);
        total += (b - a) / std::max(a, b);
    }
    return total / n;
}

}  // namespace

TEST_CASE("affinities: entropy tolerance, symmetry, normalization") {
    std::vector<ClassLabel> labels;
    auto data = cluster_data(10, 6, &labels);
    auto aff = embed::compute_affinities(data, 30, 6, 8.0);

    const double target_bits = std::log2(8.0);
    for (double h : aff.entropy_bits) CHECK(std::abs(h - target_bits) < 1e-5);

    double sum = 0;
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j) {
            double pij = aff.p[std::size_t(i) * 30 + j];
            CHECK(pij >= 0.0);
            CHECK(pij == doctest::Approx(aff.p[std::size_t(j) * 30 + i]).epsilon(1e-12));
            sum += pij;
        }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("equidistant points (regular simplex) get equal bandwidths") {
    // vertices of a regular simplex: rows of the identity are pairwise
    // equidistant in n dimensions
    const int n = 12;
    std::vector<double> data(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) data[std::size_t(i) * n + i] = 1.0;
    auto aff = embed::compute_affinities(data, n, n, 3.0);
    for (int i = 1; i < n; ++i)
        CHECK(aff.sigma[i] == doctest::Approx(aff.sigma[0]).epsilon(1e-9));
}

TEST_CASE("affinity contracts") {
    std::vector<double> same(20 * 4, 0.25);  // all-identical points
    CHECK_THROWS_AS(embed::compute_affinities(same, 20, 4, 3.0), DegeneracyError);

    std::vector<ClassLabel> labels;
    auto data = cluster_data(4, 3, &labels);  // N = 12
    CHECK_THROWS_AS(embed::compute_affinities(data, 12, 3, 0.5), ContractError);
    CHECK_THROWS_AS(embed::compute_affinities(data, 12, 3, 6.0), ContractError);  // > (N-1)/3
}

TEST_CASE("tsne separates three clusters and reduces KL") {
    std::vector<ClassLabel> labels;
    auto data = cluster_data(15, 16, &labels);
    embed::TsneConfig cfg;
    cfg.perplexity = 10.0;
    cfg.iterations = 1000;
    cfg.exaggeration_iters = 250;
    cfg.seed = 4;
    auto result = embed::tsne(data, 45, 16, cfg);
    REQUIRE(result.coords.size() == 90);
    CHECK(result.kl_final < result.kl_initial);
    CHECK(silhouette(result.coords, labels) > 0.5);
}

TEST_CASE("tsne is deterministic under a fixed seed") {
    std::vector<ClassLabel> labels;
    auto data = cluster_data(8, 8, &labels);
    embed::TsneConfig cfg;
    cfg.perplexity = 5.0;
    cfg.iterations = 60;
    cfg.exaggeration_iters = 20;
    auto a = embed::tsne(data, 24, 8, cfg);
    auto b = embed::tsne(data, 24, 8, cfg);
    CHECK(a.coords == b.coords);
    cfg.seed = 2;
    auto c = embed::tsne(data, 24, 8, cfg);
    CHECK(a.coords != c.coords);
}

TEST_CASE("tsne is permutation equivariant (content-seeded initialization)") {
    std::vector<ClassLabel> labels;
    auto data = cluster_data(8, 8, &labels);
    const int n = 24, dim = 8;
    embed::TsneConfig cfg;
    cfg.perplexity = 5.0;
    // keep the step count small: permuting the points reorders the pairwise
    // floating-point sums, and that rounding noise is amplified by further
    // gradient steps
    cfg.iterations = 8;
    cfg.exaggeration_iters = 4;
    auto base = embed::tsne(data, n, dim, cfg);

    // reverse the point order
    std::vector<double> reversed(data.size());
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d)
            reversed[std::size_t(n - 1 - i) * dim + d] = data[std::size_t(i) * dim + d];
    auto perm = embed::tsne(reversed, n, dim, cfg);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < 2; ++d) {
            double want = base.coords[std::size_t(i) * 2 + d];
            double got = perm.coords[std::size_t(n - 1 - i) * 2 + d];
            CHECK(got == doctest::Approx(want).epsilon(1e-7).scale(1.0));
        }
}

TEST_CASE("tsne contracts") {
    std::vector<double> few(9 * 4, 0.0);
    embed::TsneConfig cfg;
    cfg.perplexity = 2.0;
    CHECK_THROWS_AS(embed::tsne(few, 9, 4, cfg), ContractError);  // N >= 10
}

TEST_CASE("scatter export format") {
    std::vector<double> coords{1.5, -2.25, 0.0, 3.125, 7.0, 8.0};
    std::vector<ClassLabel> labels{ClassLabel::Meningioma, ClassLabel::NormalBrain,
                                   ClassLabel::Nondiagnostic};
    auto csv = embed::export_scatter(coords, labels);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y,label");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
    CHECK(csv.find("meningioma") != std::string::npos);

    // round-trip of the first row's coordinates
    std::istringstream reparse(csv);
    std::getline(reparse, line);  // header
    std::getline(reparse, line);
    double x, y;
    char comma;
    std::istringstream row(line);
    row >> x >> comma >> y;
    CHECK(x == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(y == doctest::Approx(-2.25).epsilon(1e-6));

    CHECK(embed::export_scatter({}, {}) == "x,y,label\n");
    CHECK_THROWS_AS(embed::export_scatter(coords, {labels[0]}), ShapeError);
}
