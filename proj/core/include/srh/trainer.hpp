#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srh/common.hpp"
#include "srh/net.hpp"
#include "srh/objectives.hpp"
#include "srh/preprocess.hpp"

namespace srh::train {

enum class Objective { CrossEntropy, SimCLR, SupCon };

Objective objective_from_name(const std::string& name);  // "ce" | "simclr" | "supcon"
std::string objective_name(Objective o);

struct TrainConfig {
    Objective objective = Objective::SupCon;
    int batch_size = 176;          // contrastive; ce/probe default 64
    int epochs = 20;
    double lr = 0.01;              // SGD, extractor
    double momentum = 0.9;
    double adam_lr = 0.01;         // Adam, linear probe
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double tau = 0.07;
    int probe_epochs = 40;
    int probe_batch_size = 64;
    std::uint64_t seed = 1;
    bool class_balanced = true;    // required for supcon
    preprocess::AugmentationSpec aug;
};

struct Checkpoint {
    nn::FeatureExtractorConfig net_config;
    std::vector<std::vector<float>> extractor_params;
    bool has_probe = false;
    std::vector<float> probe_weight;  // kNumClasses x feature_dim
    std::vector<float> probe_bias;    // kNumClasses
    preprocess::ChannelStats stats;
    std::string objective = "supcon";
    double tau = 0.07;
    std::vector<double> loss_history;  // mean loss per epoch (extractor then probe)

    nn::Network<float> make_network() const;
    bool operator==(const Checkpoint&) const = default;
};

// Versioned binary: magic "SRHCKPT1", u32 JSON blob length + blob, then
// float32 parameter arrays in declaration order. Round-trips bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// SGD training of the feature extractor (and, for the ce objective, the
// linear head jointly). Deterministic for a fixed seed.
Checkpoint train_extractor(const std::vector<preprocess::Patch>& dataset,
                           const TrainConfig& cfg, const nn::FeatureExtractorConfig& net_cfg);

// Adam training of the linear probe on frozen extractor features.
Checkpoint train_linear_probe(const Checkpoint& base,
                              const std::vector<preprocess::Patch>& dataset,
                              const TrainConfig& cfg);

// Frozen-extractor inference helpers (batched; read-only over the checkpoint).
// Features are the linear D-dimensional layer, projections the unit-norm
// d-dimensional head output.
struct EmbeddingBatch {
    int count = 0;
    int feature_dim = 0;
    int projection_dim = 0;
    std::vector<float> features;     // count x feature_dim
    std::vector<float> projections;  // count x projection_dim
};
EmbeddingBatch extract_features(const nn::Network<float>& net,
                                const preprocess::ChannelStats& stats,
                                const std::vector<preprocess::Patch>& patches,
                                int batch_size = 64);

// Softmax class distributions from the probe; requires has_probe.
std::vector<std::vector<double>> classify_patches(const Checkpoint& ckpt,
                                                  const std::vector<preprocess::Patch>& patches,
                                                  int batch_size = 64);

}  // namespace srh::train
