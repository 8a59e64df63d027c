#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "srh/objectives.hpp"
#include "test_util.hpp"

using namespace srh;
using objectives::contrastive_loss;

namespace {

// finite-difference check of a batch-loss gradient with respect to the raw
// (pre-normalization... here: already-unit) projection rows
template <typename F>
void check_grad_matches(F&& eval_loss, std::vector<double> z, const std::vector<double>& grad,
                        double h = 1e-6, double tol = 1e-5) {
    for (std::size_t i = 0; i < z.size(); ++i) {
        double keep = z[i];
        z[i] = keep + h;
        double up = eval_loss(z);
        z[i] = keep - h;
        double down = eval_loss(z);
        z[i] = keep;
        double fd = (up - down) / (2 * h);
        CHECK(grad[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
}

std::vector<double> rotate2(const std::vector<double>& v, double theta) {
    // block-rotate consecutive coordinate pairs — an orthogonal map
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) {
        out[i] = std::cos(theta) * v[i] - std::sin(theta) * v[i + 1];
        out[i + 1] = std::sin(theta) * v[i] + std::cos(theta) * v[i + 1];
    }
    return out;
}

}  // namespace

TEST_CASE("contrastive_loss hand oracles") {
    std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0}, ne1{-1.0, 0.0};

    // z = p, denominator = {p} -> exactly 0
    CHECK(contrastive_loss(e1, {e1}, {e1}, 1.0) == doctest::Approx(0.0).epsilon(1e-15));

    // z=[1,0], p=[1,0], denominator={p, [-1,0]} -> log(1+e^-2)
    CHECK(contrastive_loss(e1, {e1}, {e1, ne1}, 1.0) ==
          doctest::Approx(std::log(1.0 + std::exp(-2.0))).epsilon(1e-9));

    // z=[1,0], p=[0,1], denominator={p, [1,0]} -> log(1+e)
    CHECK(contrastive_loss(e1, {e2}, {e2, e1}, 1.0) ==
          doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-9));
}

TEST_CASE("contrastive_loss contract errors") {
    std::vector<double> z{1.0, 0.0};
    CHECK_THROWS_AS(contrastive_loss(z, {}, {{0.0, 1.0}}, 1.0), ContractError);
    CHECK_THROWS_AS(contrastive_loss(z, {{0.0, 1.0}}, {{0.0, 1.0}}, 0.0), ContractError);
    CHECK_THROWS_AS(contrastive_loss(z, {{0.0, 1.0}}, {{0.0, 1.0}}, -1.0), ContractError);
}

TEST_CASE("contrastive_loss nonnegative when positives are in the denominator") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        auto unit = [&] {
            std::vector<double> v(4);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            return nn::l2_normalize<double>(v);
        };
        auto z = unit();
        std::vector<std::vector<double>> pos{unit(), unit()};
        std::vector<std::vector<double>> den = pos;
        den.push_back(unit());
        den.push_back(unit());
        double tau = rng.uniform(0.05, 2.0);
        CHECK(contrastive_loss(z, pos, den, tau) >= -1e-12);
    }
}

TEST_CASE("contrastive_loss is rotation invariant") {
    Rng rng(23);
    auto unit = [&] {
        std::vector<double> v(4);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        return nn::l2_normalize<double>(v);
    };
    auto z = unit();
    std::vector<std::vector<double>> pos{unit()};
    std::vector<std::vector<double>> den{pos[0], unit(), unit()};
    double base = contrastive_loss(z, pos, den, 0.5);
    const double theta = 0.77;
    std::vector<std::vector<double>> pos_r, den_r;
    for (const auto& p : pos) pos_r.push_back(rotate2(p, theta));
    for (const auto& d : den) den_r.push_back(rotate2(d, theta));
    CHECK(contrastive_loss(rotate2(z, theta), pos_r, den_r, 0.5) ==
          doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("loss increases as the positive drifts away") {
    std::vector<double> z{1.0, 0.0};
    std::vector<double> hard_neg{-1.0, 0.0};
    double prev = -1.0;
    for (double theta : {0.0, 0.3, 0.6, 0.9, 1.2}) {
        std::vector<double> p{std::cos(theta), std::sin(theta)};
        double loss = contrastive_loss(z, {p}, {p, hard_neg}, 0.5);
        CHECK(loss > prev);
        prev = loss;
    }
}

TEST_CASE("large tau limit approaches log of the denominator size") {
    Rng rng(31);
    std::vector<double> z = nn::l2_normalize<double>(std::vector<double>{0.3, -0.7, 0.1});
    std::vector<std::vector<double>> den;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        den.push_back(nn::l2_normalize<double>(v));
    }
    CHECK(contrastive_loss(z, {den[0]}, den, 1e6) ==
          doctest::Approx(std::log(5.0)).epsilon(1e-3));
}

TEST_CASE("simclr gradient kernel: hand oracle and finite differences") {
    // 2 images -> 4 views; siblings (0,1) at [1,0], (2,3) at [0,1]
    std::vector<double> z{1, 0, 1, 0, 0, 1, 0, 1};
    auto result = objectives::simclr_loss_grad<double>(z, 4, 2, 1.0);
    // per anchor: positives sim 1, two negatives sim 0 ->
    // -log(e / (e + 2)) = log(1 + 2/e)
    double expect = std::log(1.0 + 2.0 * std::exp(-1.0));
    CHECK(result.loss == doctest::Approx(expect).epsilon(1e-9));

    // all views identical -> log(2N - 1)
    std::vector<double> same{1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    auto flat = objectives::simclr_loss_grad<double>(same, 6, 2, 0.3);
    CHECK(flat.loss == doctest::Approx(std::log(5.0)).epsilon(1e-9));

    // finite-difference validation of the gradient w.r.t. the unit rows
    Rng rng(5);
    std::vector<double> rows;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto u = nn::l2_normalize<double>(v);
        rows.insert(rows.end(), u.begin(), u.end());
    }
    auto got = objectives::simclr_loss_grad<double>(rows, 6, 3, 0.4);
    check_grad_matches(
        [&](const std::vector<double>& r) {
            return objectives::simclr_loss_grad<double>(r, 6, 3, 0.4).loss;
        },
        rows, got.d_proj);
}

TEST_CASE("simclr contract: at least two images, even row count") {
    std::vector<double> two{1, 0, 0, 1};
    CHECK_THROWS_AS(objectives::simclr_loss_grad<double>(two, 2, 2, 1.0), ContractError);
    std::vector<double> odd{1, 0, 0, 1, 1, 0, 0, 1, 1, 0};
    CHECK_THROWS_AS(objectives::simclr_loss_grad<double>(odd, 5, 2, 1.0), ContractError);
}

TEST_CASE("supcon oracle: two classes on orthogonal axes") {
    // {a1, a2 at [1,0]; b1, b2 at [0,1]} -> per anchor -log(e/(e+2))
    std::vector<double> z{1, 0, 1, 0, 0, 1, 0, 1};
    std::vector<int> labels{0, 0, 1, 1};
    auto result = objectives::supcon_loss_grad<double>(z, 4, 2, labels, 1.0);
    CHECK(result.loss == doctest::Approx(std::log(1.0 + 2.0 * std::exp(-1.0))).epsilon(1e-9));

    // two identical same-class rows: the only denominator term is the positive
    std::vector<double> pair{0, 1, 0, 1};
    std::vector<int> one_class{3, 3};
    auto zero = objectives::supcon_loss_grad<double>(pair, 2, 2, one_class, 0.7);
    CHECK(zero.loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("supcon rejects singleton classes and is permutation invariant") {
    std::vector<double> z{1, 0, 0, 1, 1, 0};
    std::vector<int> labels{0, 1, 0};
    CHECK_THROWS_AS(objectives::supcon_loss_grad<double>(z, 3, 2, labels, 1.0), ContractError);

    Rng rng(13);
    std::vector<std::vector<double>> rows;
    std::vector<int> lab{0, 0, 1, 1, 1, 2, 2};
    for (std::size_t i = 0; i < lab.size(); ++i) {
        std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        rows.push_back(nn::l2_normalize<double>(v));
    }
    auto flat = [&](const std::vector<int>& order) {
        std::vector<double> f;
        std::vector<int> l;
        for (int i : order) {
            f.insert(f.end(), rows[i].begin(), rows[i].end());
            l.push_back(lab[i]);
        }
        return objectives::supcon_loss_grad<double>(f, int(order.size()), 3, l, 0.5).loss;
    };
    double a = flat({0, 1, 2, 3, 4, 5, 6});
    double b = flat({6, 2, 0, 4, 3, 1, 5});
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("supcon gradient matches finite differences") {
    Rng rng(37);
    std::vector<double> rows;
    std::vector<int> labels{0, 0, 1, 1, 2, 2};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::vector<double> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto u = nn::l2_normalize<double>(v);
        rows.insert(rows.end(), u.begin(), u.end());
    }
    auto got = objectives::supcon_loss_grad<double>(rows, 6, 3, labels, 0.3);
    check_grad_matches(
        [&](const std::vector<double>& r) {
            return objectives::supcon_loss_grad<double>(r, 6, 3, labels, 0.3).loss;
        },
        rows, got.d_proj);
}

TEST_CASE("cross entropy oracles") {
    std::vector<double> onehot{0, 0, 1, 0, 0, 0, 0, 0};
    CHECK(objectives::cross_entropy_loss(onehot, 2) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> uniform(8, 0.125);
    CHECK(objectives::cross_entropy_loss(uniform, 5) ==
          doctest::Approx(std::log(8.0)).epsilon(1e-9));

    std::vector<double> p{0.5, 0.25, 0.25};
    CHECK(objectives::cross_entropy_loss(p, 1) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-9));

    // clipping keeps an impossible label finite
    std::vector<double> impossible{1.0, 0.0};
    CHECK(objectives::cross_entropy_loss(impossible, 1) ==
          doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("softmax cross entropy: values and gradient") {
    // logits all equal -> uniform probs, loss ln K
    std::vector<double> logits(2 * 4, 0.0);
    std::vector<int> labels{3, 0};
    auto r = objectives::softmax_cross_entropy<double>(logits, 2, 4, labels);
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    for (double p : r.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

    // gradient of the mean loss: (p - onehot)/N
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 4; ++k) {
            double want = (0.25 - (labels[i] == k ? 1.0 : 0.0)) / 2.0;
            CHECK(r.d_logits[std::size_t(i) * 4 + k] == doctest::Approx(want).epsilon(1e-12));
        }

    // finite differences on random logits
    Rng rng(3);
    std::vector<double> rl(3 * 5);
    for (auto& v : rl) v = rng.uniform(-2, 2);
    std::vector<int> rlab{4, 0, 2};
    auto rr = objectives::softmax_cross_entropy<double>(rl, 3, 5, rlab);
    check_grad_matches(
        [&](const std::vector<double>& x) {
            return objectives::softmax_cross_entropy<double>(x, 3, 5, rlab).loss;
        },
        rl, rr.d_logits);
}

TEST_CASE("batch wrappers are deterministic on real patches") {
    auto cfg = testutil::tiny_net_config();
    nn::Network<float> net(cfg);
    std::vector<preprocess::Patch> batch;
    for (int i = 0; i < 4; ++i)
        batch.push_back(testutil::random_patch(16, 60 + i,
                                               static_cast<ClassLabel>(i / 2)));
    auto stats = preprocess::ChannelStats::compute(batch);

    double s1 = objectives::simclr_batch_loss(net, batch, stats, 0.07, 99);
    double s2 = objectives::simclr_batch_loss(net, batch, stats, 0.07, 99);
    CHECK(s1 == s2);
    CHECK(s1 >= 0.0);

    double c1 = objectives::supcon_batch_loss(net, batch, stats, 0.07);
    double c2 = objectives::supcon_batch_loss(net, batch, stats, 0.07);
    CHECK(c1 == c2);
    CHECK(c1 >= 0.0);
}
