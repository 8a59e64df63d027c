#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "srh/common.hpp"
#include "srh/preprocess.hpp"
#include "srh/srh_io.hpp"
#include "srh/trainer.hpp"

namespace srh::eval {

using ProbDist = std::vector<double>;  // nonnegative, sums to 1 +/- 1e-6

void validate_prob_dist(const ProbDist& p);

// Elementwise sum, renormalized; equal to the arithmetic mean of the inputs.
ProbDist soft_aggregate(const std::vector<ProbDist>& dists);

// Argmax per patch, then modal class; all ties break toward the lowest index.
ClassLabel majority_vote(const std::vector<ProbDist>& dists);

int argmax_class(const ProbDist& p);  // lowest index wins ties

struct ConfusionMatrix {
    std::array<std::array<long, kNumClasses>, kNumClasses> counts{};  // [true][pred]

    void add(int true_class, int predicted) { ++counts[true_class][predicted]; }
    long total() const;
    long row_sum(int k) const;
    double accuracy() const;  // trace / total
};

struct Scored {
    ProbDist dist;
    int true_class = 0;
};

double top_k_accuracy(const std::vector<Scored>& items, int k);

// Unweighted mean of per-class recall; classes with empty rows are dropped
// (warning returned via the optional out-parameter).
double mean_class_accuracy(const ConfusionMatrix& cm, std::vector<std::string>* warnings = nullptr);

struct LevelMetrics {
    double acc = 0.0;
    double top2 = 0.0;
    double mca = 0.0;
    ConfusionMatrix confusion;
};

struct Report {
    LevelMetrics patch, slide, patient;
    std::vector<std::string> warnings;

    std::string to_json() const;
    std::string to_text(const std::string& row_name = "model") const;  // Table-1 layout
};

// One classified patch with provenance; the unit the report is built from.
struct PatchPrediction {
    std::string slide_id;
    std::string patient_id;
    int true_class = 0;
    ProbDist dist;
    bool diagnostic = true;  // filter decision; nondiagnostic patches are
                             // excluded from slide/patient aggregation unless
                             // a slide has no diagnostic patches at all
};

Report compute_report(const std::vector<PatchPrediction>& predictions);

struct EvalOptions {
    std::uint32_t patch_side = 300;
    preprocess::FilterThresholds filter;
    int batch_size = 64;
};

// Full held-out evaluation: hard-fails with LeakageError on any train/test
// patient overlap before touching a single slide.
Report evaluate_testset(const train::Checkpoint& ckpt, const io::DatasetManifest& manifest,
                        const io::SplitSpec& split, const EvalOptions& options);

}  // namespace srh::eval
