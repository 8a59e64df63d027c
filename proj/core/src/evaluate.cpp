#include "srh/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace srh::eval {

using nlohmann::json;

void validate_prob_dist(const ProbDist& p) {
    if (p.empty()) throw ContractError("empty probability distribution");
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) throw ContractError("negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ContractError("probabilities do not sum to 1");
}

ProbDist soft_aggregate(const std::vector<ProbDist>& dists) {
    if (dists.empty()) throw ContractError("soft_aggregate over empty list");
    const std::size_t k = dists[0].size();
    ProbDist sum(k, 0.0);
    for (const auto& d : dists) {
        if (d.size() != k) throw ShapeError("mixed distribution sizes");
        for (std::size_t i = 0; i < k; ++i) sum[i] += d[i];
    }
    double total = 0.0;
    for (double v : sum) total += v;
    if (total <= 0.0) throw ContractError("degenerate aggregate");
    for (double& v : sum) v /= total;
    return sum;
}

int argmax_class(const ProbDist& p) {
    int best = 0;
    for (int i = 1; i < int(p.size()); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

ClassLabel majority_vote(const std::vector<ProbDist>& dists) {
    if (dists.empty()) throw ContractError("majority_vote over empty list");
    std::vector<int> votes(dists[0].size(), 0);
    for (const auto& d : dists) ++votes[argmax_class(d)];
    int best = 0;
    for (int i = 1; i < int(votes.size()); ++i)
        if (votes[i] > votes[best]) best = i;
    return static_cast<ClassLabel>(best);
}

long ConfusionMatrix::total() const {
    long t = 0;
    for (const auto& row : counts)
        for (long v : row) t += v;
    return t;
}

long ConfusionMatrix::row_sum(int k) const {
    long t = 0;
    for (long v : counts[k]) t += v;
    return t;
}

double ConfusionMatrix::accuracy() const {
    long t = total();
    if (t == 0) return 0.0;
    long diag = 0;
    for (int k = 0; k < kNumClasses; ++k) diag += counts[k][k];
    return double(diag) / double(t);
}

double top_k_accuracy(const std::vector<Scored>& items, int k) {
    if (items.empty()) return 0.0;
    if (k < 1) throw ContractError("k must be >= 1");
    long hits = 0;
    for (const auto& item : items) {
        const auto& p = item.dist;
        int t = item.true_class;
        // rank of the true class with ties broken by class index
        int rank = 0;
        for (int j = 0; j < int(p.size()); ++j) {
            if (j == t) continue;
            if (p[j] > p[t] || (p[j] == p[t] && j < t)) ++rank;
        }
        if (rank < k) ++hits;
    }
    return double(hits) / double(items.size());
}

double mean_class_accuracy(const ConfusionMatrix& cm, std::vector<std::string>* warnings) {
    double sum = 0.0;
    int populated = 0;
    for (int k = 0; k < kNumClasses; ++k) {
        long rs = cm.row_sum(k);
        if (rs == 0) {
            if (warnings)
                warnings->push_back("class " + std::string(kClassNames[k]) +
                                    " absent from the test set; dropped from MCA");
            continue;
        }
        sum += double(cm.counts[k][k]) / double(rs);
        ++populated;
    }
    if (populated == 0) throw ContractError("no populated classes for MCA");
    return sum / double(populated);
}

namespace {

LevelMetrics metrics_from_scored(const std::vector<Scored>& items,
                                 std::vector<std::string>* warnings) {
    LevelMetrics m;
    for (const auto& item : items) m.confusion.add(item.true_class, argmax_class(item.dist));
    m.acc = m.confusion.accuracy();
    m.top2 = top_k_accuracy(items, 2);
    m.mca = mean_class_accuracy(m.confusion, warnings);
    return m;
}

json metrics_to_json(const LevelMetrics& m) {
    json confusion = json::array();
    for (const auto& row : m.confusion.counts) confusion.push_back(row);
    return {{"metrics", {{"acc", m.acc}, {"top2", m.top2}, {"mca", m.mca}}},
            {"confusion", confusion}};
}

}  // namespace

Report compute_report(const std::vector<PatchPrediction>& predictions) {
    if (predictions.empty()) throw ContractError("no predictions to report");
    Report report;

    std::vector<Scored> patch_items;
    patch_items.reserve(predictions.size());
    for (const auto& p : predictions) {
        validate_prob_dist(p.dist);
        patch_items.push_back({p.dist, p.true_class});
    }
    report.patch = metrics_from_scored(patch_items, &report.warnings);

    // slide and patient pools; nondiagnostic-filtered patches are excluded
    // unless the pool would otherwise be empty
    auto pool = [&](auto key_fn) {
        std::map<std::string, std::pair<std::vector<ProbDist>, std::vector<ProbDist>>> pools;
        std::map<std::string, int> truth;
        for (const auto& p : predictions) {
            auto& entry = pools[key_fn(p)];
            (p.diagnostic ? entry.first : entry.second).push_back(p.dist);
            truth[key_fn(p)] = p.true_class;
        }
        std::vector<Scored> items;
        for (auto& [key, entry] : pools) {
            const auto& use = entry.first.empty() ? entry.second : entry.first;
            items.push_back({soft_aggregate(use), truth[key]});
        }
        return items;
    };

    report.slide = metrics_from_scored(
        pool([](const PatchPrediction& p) { return p.slide_id; }), &report.warnings);
    report.patient = metrics_from_scored(
        pool([](const PatchPrediction& p) { return p.patient_id; }), &report.warnings);
    return report;
}

std::string Report::to_json() const {
    json j;
    j["levels"] = {{"patch", metrics_to_json(patch)},
                   {"slide", metrics_to_json(slide)},
                   {"patient", metrics_to_json(patient)}};
    j["class_names"] = kClassNames;
    j["warnings"] = warnings;
    return j.dump(2);
}

std::string Report::to_text(const std::string& row_name) const {
    std::ostringstream out;
    out << std::fixed;
    out.precision(3);
    out << "                 |        Patch        |        Slide        |       Patient       \n";
    out << "                 |  Acc   Top 2   MCA  |  Acc   Top 2   MCA  |  Acc   Top 2   MCA  \n";
    auto row = [&](const LevelMetrics& m) {
        out << " " << m.acc << "  " << m.top2 << "  " << m.mca << " ";
    };
    out.width(16);
    out << std::left << row_name << std::right << " |";
    row(patch);
    out << "|";
    row(slide);
    out << "|";
    row(patient);
    out << "\n";
    return out.str();
}

Report evaluate_testset(const train::Checkpoint& ckpt, const io::DatasetManifest& manifest,
                        const io::SplitSpec& split, const EvalOptions& options) {
    // leakage guard: hard failure before any inference
    for (const auto& p : split.test_patients)
        if (split.train_patients.count(p))
            throw LeakageError("patient present in both train and test: " + p);
    for (const auto& e : manifest.entries) {
        bool in_train = split.train_patients.count(e.patient_id) > 0;
        bool in_test = split.test_patients.count(e.patient_id) > 0;
        if (in_train && in_test)
            throw LeakageError("patient present in both train and test: " + e.patient_id);
    }

    std::vector<PatchPrediction> predictions;
    for (const auto& e : manifest.entries) {
        if (!split.test_patients.count(e.patient_id)) continue;
        auto img = preprocess::to_three_channel(io::read_slide(e.slide_path));
        auto patches = preprocess::tile(img, options.patch_side, options.patch_side, e.slide_id,
                                        e.patient_id, e.label);
        auto dists = train::classify_patches(ckpt, patches, options.batch_size);
        for (std::size_t i = 0; i < patches.size(); ++i) {
            PatchPrediction p;
            p.slide_id = e.slide_id;
            p.patient_id = e.patient_id;
            p.true_class = int(e.label);
            p.dist = std::move(dists[i]);
            p.diagnostic = preprocess::filter_patch(patches[i], options.filter) !=
                           preprocess::FilterDecision::Nondiagnostic;
            predictions.push_back(std::move(p));
        }
    }
    if (predictions.empty()) throw ContractError("no test slides in manifest");
    return compute_report(predictions);
}

}  // namespace srh::eval
