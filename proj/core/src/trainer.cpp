#include "srh/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "srh/optim.hpp"

namespace srh::train {

using nlohmann::json;

Objective objective_from_name(const std::string& name) {
    if (name == "ce") return Objective::CrossEntropy;
    if (name == "simclr") return Objective::SimCLR;
    if (name == "supcon") return Objective::SupCon;
    throw ContractError("unknown objective: " + name);
}

std::string objective_name(Objective o) {
    switch (o) {
        case Objective::CrossEntropy: return "ce";
        case Objective::SimCLR: return "simclr";
        case Objective::SupCon: return "supcon";
    }
    throw ContractError("bad objective enum");
}

nn::Network<float> Checkpoint::make_network() const {
    nn::Network<float> net(net_config);
    if (net.params().size() != extractor_params.size())
        throw ShapeError("checkpoint parameter tensor count mismatch");
    for (std::size_t t = 0; t < extractor_params.size(); ++t) {
        if (net.params()[t].size() != extractor_params[t].size())
            throw ShapeError("checkpoint parameter tensor shape mismatch");
        net.params()[t] = extractor_params[t];
    }
    return net;
}

namespace {

json net_config_to_json(const nn::FeatureExtractorConfig& c) {
    json blocks = json::array();
    for (const auto& b : c.blocks) blocks.push_back({{"out_channels", b.out_channels},
                                                     {"stride", b.stride}});
    return {{"input_side", c.input_side},
            {"input_channels", c.input_channels},
            {"blocks", blocks},
            {"feature_dim", c.feature_dim},
            {"projection_dim", c.projection_dim},
            {"init_seed", c.init_seed}};
}

nn::FeatureExtractorConfig net_config_from_json(const json& j) {
    nn::FeatureExtractorConfig c;
    c.input_side = j.at("input_side").get<int>();
    c.input_channels = j.at("input_channels").get<int>();
    c.blocks.clear();
    for (const auto& b : j.at("blocks"))
        c.blocks.push_back({b.at("out_channels").get<int>(), b.at("stride").get<int>()});
    c.feature_dim = j.at("feature_dim").get<int>();
    c.projection_dim = j.at("projection_dim").get<int>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    return c;
}

void put_u32le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_floats(std::ofstream& out, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 4));
}

void read_floats(std::ifstream& in, std::vector<float>& v, std::size_t n,
                 const std::filesystem::path& path) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * 4));
    if (std::size_t(in.gcount()) != n * 4)
        throw SizeError("truncated checkpoint payload: " + path.string());
}

constexpr char kCkptMagic[8] = {'S', 'R', 'H', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    json meta;
    meta["net"] = net_config_to_json(ckpt.net_config);
    meta["objective"] = ckpt.objective;
    meta["tau"] = ckpt.tau;
    meta["has_probe"] = ckpt.has_probe;
    meta["stats_mean"] = ckpt.stats.mean;
    meta["stats_std"] = ckpt.stats.stddev;
    meta["loss_history"] = ckpt.loss_history;
    json shapes = json::array();
    for (const auto& t : ckpt.extractor_params) shapes.push_back(t.size());
    meta["tensor_sizes"] = shapes;
    std::string blob = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for write: " + path.string());
    out.write(kCkptMagic, 8);
    put_u32le(out, std::uint32_t(blob.size()));
    out.write(blob.data(), std::streamsize(blob.size()));
    for (const auto& t : ckpt.extractor_params) write_floats(out, t);
    if (ckpt.has_probe) {
        write_floats(out, ckpt.probe_weight);
        write_floats(out, ckpt.probe_bias);
    }
    if (!out) throw Error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw FormatError("bad checkpoint magic: " + path.string());
    unsigned char lb[4];
    in.read(reinterpret_cast<char*>(lb), 4);
    std::uint32_t len = std::uint32_t(lb[0]) | std::uint32_t(lb[1]) << 8 |
                        std::uint32_t(lb[2]) << 16 | std::uint32_t(lb[3]) << 24;
    std::string blob(len, '\0');
    in.read(blob.data(), len);
    if (std::size_t(in.gcount()) != len)
        throw SizeError("truncated checkpoint header: " + path.string());
    json meta = json::parse(blob, nullptr, /*allow_exceptions=*/false);
    if (meta.is_discarded()) throw FormatError("bad checkpoint metadata: " + path.string());

    Checkpoint ckpt;
    ckpt.net_config = net_config_from_json(meta.at("net"));
    ckpt.objective = meta.at("objective").get<std::string>();
    ckpt.tau = meta.at("tau").get<double>();
    ckpt.has_probe = meta.at("has_probe").get<bool>();
    ckpt.stats.mean = meta.at("stats_mean").get<std::array<double, 3>>();
    ckpt.stats.stddev = meta.at("stats_std").get<std::array<double, 3>>();
    ckpt.loss_history = meta.at("loss_history").get<std::vector<double>>();
    for (const auto& sz : meta.at("tensor_sizes")) {
        std::vector<float> t;
        read_floats(in, t, sz.get<std::size_t>(), path);
        ckpt.extractor_params.push_back(std::move(t));
    }
    if (ckpt.has_probe) {
        read_floats(in, ckpt.probe_weight,
                    std::size_t(kNumClasses) * ckpt.net_config.feature_dim, path);
        read_floats(in, ckpt.probe_bias, kNumClasses, path);
    }
    return ckpt;
}

namespace {

// Flat optimizer state mirroring a Grads tensor list.
template <typename T>
std::vector<std::vector<T>> zero_like(const std::vector<std::vector<T>>& params) {
    std::vector<std::vector<T>> out;
    out.reserve(params.size());
    for (const auto& t : params) out.emplace_back(t.size(), T(0));
    return out;
}

// Emits batches; for supcon the batch is built from whole same-class pairs so
// every represented class has >= 2 members.
class BatchSampler {
public:
    BatchSampler(const std::vector<preprocess::Patch>& data, int batch_size, bool class_balanced,
                 std::uint64_t seed)
        : data_(data), batch_size_(batch_size), class_balanced_(class_balanced), rng_(seed) {}

    // One epoch worth of index batches.
    std::vector<std::vector<int>> epoch_batches() {
        std::vector<std::vector<int>> batches;
        if (!class_balanced_) {
            std::vector<int> idx(data_.size());
            std::iota(idx.begin(), idx.end(), 0);
            shuffle(idx);
            for (std::size_t s = 0; s + 1 < idx.size() + 1; s += batch_size_) {
                std::vector<int> b(idx.begin() + s,
                                   idx.begin() + std::min(s + batch_size_, idx.size()));
                if (int(b.size()) >= 2) batches.push_back(std::move(b));
            }
            return batches;
        }
        // group by class, shuffle within class, emit pairs round-robin
        std::map<int, std::vector<int>> by_class;
        for (std::size_t i = 0; i < data_.size(); ++i)
            by_class[int(data_[i].label)].push_back(int(i));
        std::vector<std::vector<int>> classes;
        for (auto& [label, idx] : by_class) {
            if (idx.size() < 2)
                throw ContractError("class-balanced sampler: class " + std::to_string(label) +
                                    " has a single patch, so it can never have a positive");
            shuffle(idx);
            if (idx.size() % 2 == 1) idx.pop_back();
            classes.push_back(idx);
        }
        if (classes.empty()) throw ContractError("class-balanced sampler needs >= 2 per class");
        std::vector<std::size_t> cursor(classes.size(), 0);
        std::vector<int> batch;
        bool remaining = true;
        while (remaining) {
            remaining = false;
            for (std::size_t c = 0; c < classes.size(); ++c) {
                if (cursor[c] + 2 <= classes[c].size()) {
                    batch.push_back(classes[c][cursor[c]]);
                    batch.push_back(classes[c][cursor[c] + 1]);
                    cursor[c] += 2;
                    remaining = remaining || cursor[c] + 2 <= classes[c].size();
                    if (int(batch.size()) >= batch_size_) {
                        batches.push_back(batch);
                        batch.clear();
                    }
                } else {
                    remaining = remaining || cursor[c] + 2 <= classes[c].size();
                }
            }
        }
        if (int(batch.size()) >= 4) batches.push_back(batch);  // tail keeps the pair guarantee
        return batches;
    }

private:
    void shuffle(std::vector<int>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[std::size_t(rng_.next_below(i))]);
    }

    const std::vector<preprocess::Patch>& data_;
    int batch_size_;
    bool class_balanced_;
    Rng rng_;
};

}  // namespace

Checkpoint train_extractor(const std::vector<preprocess::Patch>& dataset, const TrainConfig& cfg,
                           const nn::FeatureExtractorConfig& net_cfg) {
    if (dataset.empty()) throw ContractError("empty training dataset");
    if (cfg.batch_size < 2) throw ContractError("batch_size must be >= 2");

    nn::Network<float> net(net_cfg);
    net.init_params(mix_seed(cfg.seed, net_cfg.init_seed));

    Checkpoint ckpt;
    ckpt.net_config = net_cfg;
    ckpt.stats = preprocess::ChannelStats::compute(dataset);
    ckpt.objective = objective_name(cfg.objective);
    ckpt.tau = cfg.tau;

    const int D = net_cfg.feature_dim;
    // ce trains the linear head jointly with the extractor
    std::vector<float> probe_w(std::size_t(kNumClasses) * D, 0.0f);
    std::vector<float> probe_b(kNumClasses, 0.0f);
    if (cfg.objective == Objective::CrossEntropy) {
        Rng rng(mix_seed(cfg.seed, 0xcef));
        double bound = std::sqrt(1.0 / D);
        for (auto& w : probe_w) w = float(rng.uniform(-bound, bound));
    }

    auto velocity = zero_like(net.params());
    std::vector<float> vel_pw(probe_w.size(), 0.0f), vel_pb(probe_b.size(), 0.0f);

    const bool balanced =
        cfg.objective == Objective::SupCon || (cfg.class_balanced && cfg.objective != Objective::SimCLR);
    BatchSampler sampler(dataset, cfg.batch_size, balanced, mix_seed(cfg.seed, 0x5a));
    std::uint64_t aug_counter = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int batch_count = 0;
        for (const auto& batch_idx : sampler.epoch_batches()) {
            std::vector<preprocess::Patch> batch;
            batch.reserve(batch_idx.size());
            for (int i : batch_idx) batch.push_back(dataset[i]);

            double loss = 0.0;
            nn::Grads<float> grads = net.zero_grads();
            std::vector<float> d_pw, d_pb;

            if (cfg.objective == Objective::SimCLR) {
                std::vector<preprocess::Patch> views;
                views.reserve(2 * batch.size());
                for (auto& p : batch) {
                    auto [a, b] =
                        preprocess::augment_pair(p, mix_seed(cfg.seed, 0xa6 + aug_counter++),
                                                 cfg.aug);
                    views.push_back(std::move(a));
                    views.push_back(std::move(b));
                }
                auto tensor = objectives::patches_to_batch(views, ckpt.stats);
                auto cache = net.forward(tensor);
                auto lg = objectives::simclr_loss_grad<float>(
                    cache.proj, int(views.size()), net_cfg.projection_dim, cfg.tau);
                loss = lg.loss;
                grads = net.backward(cache, tensor, lg.d_proj, {});
            } else if (cfg.objective == Objective::SupCon) {
                auto tensor = objectives::patches_to_batch(batch, ckpt.stats);
                auto cache = net.forward(tensor);
                std::vector<int> labels(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = int(batch[i].label);
                auto lg = objectives::supcon_loss_grad<float>(
                    cache.proj, int(batch.size()), net_cfg.projection_dim, labels, cfg.tau);
                loss = lg.loss;
                grads = net.backward(cache, tensor, lg.d_proj, {});
            } else {
                auto tensor = objectives::patches_to_batch(batch, ckpt.stats);
                auto cache = net.forward(tensor);
                const int N = int(batch.size());
                std::vector<float> logits(std::size_t(N) * kNumClasses, 0.0f);
                for (int s = 0; s < N; ++s)
                    for (int k = 0; k < kNumClasses; ++k) {
                        double acc = probe_b[k];
                        for (int i = 0; i < D; ++i)
                            acc += double(probe_w[std::size_t(k) * D + i]) *
                                   cache.feat[std::size_t(s) * D + i];
                        logits[std::size_t(s) * kNumClasses + k] = float(acc);
                    }
                std::vector<int> labels(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = int(batch[i].label);
                auto ce = objectives::softmax_cross_entropy<float>(logits, N, kNumClasses, labels);
                loss = ce.loss;

                std::vector<float> d_feat(std::size_t(N) * D, 0.0f);
                d_pw.assign(probe_w.size(), 0.0f);
                d_pb.assign(probe_b.size(), 0.0f);
                for (int s = 0; s < N; ++s)
                    for (int k = 0; k < kNumClasses; ++k) {
                        float dl = ce.d_logits[std::size_t(s) * kNumClasses + k];
                        d_pb[k] += dl;
                        for (int i = 0; i < D; ++i) {
                            d_pw[std::size_t(k) * D + i] += dl * cache.feat[std::size_t(s) * D + i];
                            d_feat[std::size_t(s) * D + i] += dl * probe_w[std::size_t(k) * D + i];
                        }
                    }
                grads = net.backward(cache, tensor, {}, d_feat);
            }

            for (std::size_t t = 0; t < net.params().size(); ++t)
                optim::sgd_step<float>(net.params()[t], grads.tensors[t], cfg.lr, cfg.momentum,
                                       velocity[t]);
            if (!d_pw.empty()) {
                optim::sgd_step<float>(probe_w, d_pw, cfg.lr, cfg.momentum, vel_pw);
                optim::sgd_step<float>(probe_b, d_pb, cfg.lr, cfg.momentum, vel_pb);
            }
            epoch_loss += loss;
            ++batch_count;
        }
        ckpt.loss_history.push_back(batch_count > 0 ? epoch_loss / batch_count : 0.0);
    }

    ckpt.extractor_params = net.params();
    if (cfg.objective == Objective::CrossEntropy) {
        ckpt.has_probe = true;
        ckpt.probe_weight = std::move(probe_w);
        ckpt.probe_bias = std::move(probe_b);
    }
    return ckpt;
}

EmbeddingBatch extract_features(const nn::Network<float>& net,
                                const preprocess::ChannelStats& stats,
                                const std::vector<preprocess::Patch>& patches, int batch_size) {
    EmbeddingBatch out;
    out.count = int(patches.size());
    out.feature_dim = net.config().feature_dim;
    out.projection_dim = net.config().projection_dim;
    out.features.resize(std::size_t(out.count) * out.feature_dim);
    out.projections.resize(std::size_t(out.count) * out.projection_dim);
    for (std::size_t start = 0; start < patches.size(); start += batch_size) {
        std::size_t end = std::min(start + batch_size, patches.size());
        std::vector<preprocess::Patch> chunk(patches.begin() + start, patches.begin() + end);
        auto cache = net.forward(objectives::patches_to_batch(chunk, stats));
        std::copy(cache.feat.begin(), cache.feat.end(),
                  out.features.begin() + start * out.feature_dim);
        std::copy(cache.proj.begin(), cache.proj.end(),
                  out.projections.begin() + start * out.projection_dim);
    }
    return out;
}

Checkpoint train_linear_probe(const Checkpoint& base,
                              const std::vector<preprocess::Patch>& dataset,
                              const TrainConfig& cfg) {
    if (dataset.empty()) throw ContractError("empty probe dataset");
    auto net = base.make_network();
    auto emb = extract_features(net, base.stats, dataset, cfg.probe_batch_size);
    const int D = emb.feature_dim;

    Checkpoint out = base;  // extractor params frozen: copied bit-identically
    out.probe_weight.assign(std::size_t(kNumClasses) * D, 0.0f);
    out.probe_bias.assign(kNumClasses, 0.0f);
    Rng rng(mix_seed(cfg.seed, 0x9b0));
    double bound = std::sqrt(1.0 / D);
    for (auto& w : out.probe_weight) w = float(rng.uniform(-bound, bound));

    std::vector<float> mw(out.probe_weight.size(), 0.0f), vw(out.probe_weight.size(), 0.0f);
    std::vector<float> mb(kNumClasses, 0.0f), vb(kNumClasses, 0.0f);
    long step = 0;

    std::vector<int> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x9b1));

    for (int epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[std::size_t(shuffle_rng.next_below(i))]);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < idx.size(); start += cfg.probe_batch_size) {
            std::size_t end = std::min(start + cfg.probe_batch_size, idx.size());
            const int N = int(end - start);
            std::vector<float> logits(std::size_t(N) * kNumClasses, 0.0f);
            std::vector<int> labels(N);
            for (int s = 0; s < N; ++s) {
                int di = idx[start + s];
                labels[s] = int(dataset[di].label);
                const float* f = emb.features.data() + std::size_t(di) * D;
                for (int k = 0; k < kNumClasses; ++k) {
                    double acc = out.probe_bias[k];
                    for (int j = 0; j < D; ++j)
                        acc += double(out.probe_weight[std::size_t(k) * D + j]) * f[j];
                    logits[std::size_t(s) * kNumClasses + k] = float(acc);
                }
            }
            auto ce = objectives::softmax_cross_entropy<float>(logits, N, kNumClasses, labels);
            std::vector<float> d_w(out.probe_weight.size(), 0.0f), d_b(kNumClasses, 0.0f);
            for (int s = 0; s < N; ++s) {
                int di = idx[start + s];
                const float* f = emb.features.data() + std::size_t(di) * D;
                for (int k = 0; k < kNumClasses; ++k) {
                    float dl = ce.d_logits[std::size_t(s) * kNumClasses + k];
                    d_b[k] += dl;
                    for (int j = 0; j < D; ++j) d_w[std::size_t(k) * D + j] += dl * f[j];
                }
            }
            ++step;
            optim::adam_step<float>(out.probe_weight, d_w, cfg.adam_lr, cfg.adam_beta1,
                                    cfg.adam_beta2, cfg.adam_eps, mw, vw, step);
            optim::adam_step<float>(out.probe_bias, d_b, cfg.adam_lr, cfg.adam_beta1,
                                    cfg.adam_beta2, cfg.adam_eps, mb, vb, step);
            epoch_loss += ce.loss;
            ++batches;
        }
        out.loss_history.push_back(batches > 0 ? epoch_loss / batches : 0.0);
    }
    out.has_probe = true;
    return out;
}

std::vector<std::vector<double>> classify_patches(const Checkpoint& ckpt,
                                                  const std::vector<preprocess::Patch>& patches,
                                                  int batch_size) {
    if (!ckpt.has_probe) throw ContractError("checkpoint has no linear probe");
    auto net = ckpt.make_network();
    auto emb = extract_features(net, ckpt.stats, patches, batch_size);
    const int D = emb.feature_dim;
    std::vector<std::vector<double>> dists;
    dists.reserve(patches.size());
    for (int s = 0; s < emb.count; ++s) {
        const float* f = emb.features.data() + std::size_t(s) * D;
        std::vector<double> logits(kNumClasses);
        for (int k = 0; k < kNumClasses; ++k) {
            double acc = ckpt.probe_bias[k];
            for (int j = 0; j < D; ++j)
                acc += double(ckpt.probe_weight[std::size_t(k) * D + j]) * f[j];
            logits[k] = acc;
        }
        double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double& l : logits) {
            l = std::exp(l - mx);
            sum += l;
        }
        for (double& l : logits) l /= sum;
        dists.push_back(std::move(logits));
    }
    return dists;
}

}  // namespace srh::train
