#include <benchmark/benchmark.h>

#include "srh/net.hpp"
#include "srh/objectives.hpp"
#include "srh/preprocess.hpp"
#include "srh/synth.hpp"
#include "srh/tsne.hpp"

using namespace srh;

namespace {

nn::FeatureExtractorConfig bench_net_config() {
    nn::FeatureExtractorConfig cfg;
    cfg.input_side = 64;
    return cfg;
}

nn::Tensor4<float> bench_batch(int n) {
    nn::Tensor4<float> t(n, 3, 64, 64);
    Rng rng(1);
    for (auto& v : t.values) v = float(rng.next_double());
    return t;
}

void BM_forward(benchmark::State& state) {
    nn::Network<float> net(bench_net_config());
    auto batch = bench_batch(int(state.range(0)));
    for (auto _ : state) {
        auto cache = net.forward(batch);
        benchmark::DoNotOptimize(cache.proj.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_forward)->Arg(1)->Arg(16)->Arg(64);

void BM_forward_backward(benchmark::State& state) {
    nn::Network<float> net(bench_net_config());
    auto batch = bench_batch(int(state.range(0)));
    std::vector<int> labels(state.range(0));
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i % 4) / 2;
    for (auto _ : state) {
        auto cache = net.forward(batch);
        auto loss = objectives::supcon_loss_grad<float>(
            cache.proj, int(state.range(0)), net.config().projection_dim, labels, 0.07);
        auto grads = net.backward(cache, batch, loss.d_proj, {});
        benchmark::DoNotOptimize(grads.tensors.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_forward_backward)->Arg(16)->Arg(64);

void BM_generate_slide(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto img = synth::generate_synthetic_slide(ClassLabel::Meningioma, ++seed, 0, 192, 192,
                                                   64);
        benchmark::DoNotOptimize(img.ch2930.data());
    }
}
BENCHMARK(BM_generate_slide);

void BM_tile(benchmark::State& state) {
    auto img = preprocess::to_three_channel(
        synth::generate_synthetic_slide(ClassLabel::Meningioma, 1, 0, 576, 576, 64));
    for (auto _ : state) {
        auto patches = preprocess::tile(img, 64, 21);
        benchmark::DoNotOptimize(patches.data());
    }
}
BENCHMARK(BM_tile);

void BM_augment_pair(benchmark::State& state) {
    auto img = preprocess::to_three_channel(
        synth::generate_synthetic_slide(ClassLabel::Schwannoma, 2, 0, 64, 64, 64));
    auto patch = preprocess::tile(img, 64, 64)[0];
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto pair = preprocess::augment_pair(patch, ++seed);
        benchmark::DoNotOptimize(pair.first.pixels.data());
    }
}
BENCHMARK(BM_augment_pair);

void BM_tsne(benchmark::State& state) {
    const int n = int(state.range(0)), dim = 32;
    Rng rng(5);
    std::vector<double> data(std::size_t(n) * dim);
    for (auto& v : data) v = rng.normal();
    embed::TsneConfig cfg;
    cfg.perplexity = 10.0;
    cfg.iterations = 50;
    cfg.exaggeration_iters = 20;
    for (auto _ : state) {
        auto r = embed::tsne(data, n, dim, cfg);
        benchmark::DoNotOptimize(r.coords.data());
    }
}
BENCHMARK(BM_tsne)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
