// Command-line driver for the SRH pipeline: synthetic cohort generation,
// extractor training, linear probing, held-out evaluation, margin heatmaps
// and tSNE embedding export.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "srh/evaluate.hpp"
#include "srh/net.hpp"
#include "srh/png.hpp"
#include "srh/preprocess.hpp"
#include "srh/segment.hpp"
#include "srh/srh_io.hpp"
#include "srh/synth.hpp"
#include "srh/trainer.hpp"
#include "srh/tsne.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace srh;

namespace {

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
    bool deterministic = false;

    // cohort
    int train_patients_per_class = 40;
    int test_patients_per_class = 10;
    int slides_per_patient = 2;
    std::uint32_t slide_height = 192;
    std::uint32_t slide_width = 192;

    std::uint32_t patch_side = 64;
    preprocess::FilterThresholds filter;

    nn::FeatureExtractorConfig net;
    train::TrainConfig train;

    embed::TsneConfig tsne;
    int tsne_max_points = 2000;

    std::uint32_t segment_stride = 0;  // 0 -> patch_side / 3
    double segment_alpha = 0.6;

    double test_fraction() const {
        return double(test_patients_per_class) /
               double(train_patients_per_class + test_patients_per_class);
    }
    std::uint32_t effective_stride() const {
        return segment_stride > 0 ? segment_stride : std::max(1u, patch_side / 3);
    }
};

json config_to_json(const RunConfig& c) {
    json blocks = json::array();
    for (const auto& b : c.net.blocks) blocks.push_back({b.out_channels, b.stride});
    return {
        {"seed", c.seed},
        {"out_dir", c.out_dir},
        {"deterministic", c.deterministic},
        {"cohort",
         {{"train_patients_per_class", c.train_patients_per_class},
          {"test_patients_per_class", c.test_patients_per_class},
          {"slides_per_patient", c.slides_per_patient},
          {"slide_height", c.slide_height},
          {"slide_width", c.slide_width}}},
        {"patch_side", c.patch_side},
        {"filter", {{"t_var", c.filter.t_var}, {"t_mean", c.filter.t_mean}}},
        {"net",
         {{"blocks", blocks},
          {"feature_dim", c.net.feature_dim},
          {"projection_dim", c.net.projection_dim},
          {"init_seed", c.net.init_seed}}},
        {"train",
         {{"objective", train::objective_name(c.train.objective)},
          {"batch_size", c.train.batch_size},
          {"epochs", c.train.epochs},
          {"lr", c.train.lr},
          {"momentum", c.train.momentum},
          {"tau", c.train.tau},
          {"adam_lr", c.train.adam_lr},
          {"probe_epochs", c.train.probe_epochs},
          {"probe_batch_size", c.train.probe_batch_size}}},
        {"tsne",
         {{"perplexity", c.tsne.perplexity},
          {"iterations", c.tsne.iterations},
          {"learning_rate", c.tsne.learning_rate},
          {"seed", c.tsne.seed},
          {"max_points", c.tsne_max_points}}},
        {"segment", {{"stride", c.segment_stride}, {"alpha", c.segment_alpha}}},
    };
}

void config_from_json(RunConfig& c, const json& j) {
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.deterministic = j.value("deterministic", c.deterministic);
    if (j.contains("cohort")) {
        const auto& co = j["cohort"];
        c.train_patients_per_class = co.value("train_patients_per_class", c.train_patients_per_class);
        c.test_patients_per_class = co.value("test_patients_per_class", c.test_patients_per_class);
        c.slides_per_patient = co.value("slides_per_patient", c.slides_per_patient);
        c.slide_height = co.value("slide_height", c.slide_height);
        c.slide_width = co.value("slide_width", c.slide_width);
    }
    c.patch_side = j.value("patch_side", c.patch_side);
    if (j.contains("filter")) {
        c.filter.t_var = j["filter"].value("t_var", c.filter.t_var);
        c.filter.t_mean = j["filter"].value("t_mean", c.filter.t_mean);
    }
    if (j.contains("net")) {
        const auto& n = j["net"];
        if (n.contains("blocks")) {
            c.net.blocks.clear();
            for (const auto& b : n["blocks"])
                c.net.blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
        }
        c.net.feature_dim = n.value("feature_dim", c.net.feature_dim);
        c.net.projection_dim = n.value("projection_dim", c.net.projection_dim);
        c.net.init_seed = n.value("init_seed", c.net.init_seed);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        if (t.contains("objective"))
            c.train.objective = train::objective_from_name(t["objective"].get<std::string>());
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.lr = t.value("lr", c.train.lr);
        c.train.momentum = t.value("momentum", c.train.momentum);
        c.train.tau = t.value("tau", c.train.tau);
        c.train.adam_lr = t.value("adam_lr", c.train.adam_lr);
        c.train.probe_epochs = t.value("probe_epochs", c.train.probe_epochs);
        c.train.probe_batch_size = t.value("probe_batch_size", c.train.probe_batch_size);
    }
    if (j.contains("tsne")) {
        const auto& t = j["tsne"];
        c.tsne.perplexity = t.value("perplexity", c.tsne.perplexity);
        c.tsne.iterations = t.value("iterations", c.tsne.iterations);
        c.tsne.learning_rate = t.value("learning_rate", c.tsne.learning_rate);
        c.tsne.seed = t.value("seed", c.tsne.seed);
        c.tsne_max_points = t.value("max_points", c.tsne_max_points);
    }
    if (j.contains("segment")) {
        c.segment_stride = j["segment"].value("stride", c.segment_stride);
        c.segment_alpha = j["segment"].value("alpha", c.segment_alpha);
    }
}

RunConfig load_config(const std::string& path) {
    RunConfig c;
    c.net.input_side = int(c.patch_side);
    if (path.empty()) return c;
    std::ifstream in(path);
    if (!in) throw Error("cannot open config: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("config is not valid JSON: " + path);
    config_from_json(c, j);
    c.net.input_side = int(c.patch_side);
    return c;
}

void write_resolved_config(const RunConfig& c) {
    fs::create_directories(c.out_dir);
    std::ofstream out(fs::path(c.out_dir) / "config.resolved.json");
    out << config_to_json(c).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const RunConfig& cfg) {
    write_resolved_config(cfg);
    fs::path slide_dir = fs::path(cfg.out_dir) / "slides";
    fs::create_directories(slide_dir);

    io::DatasetManifest manifest;
    const int patients = cfg.train_patients_per_class + cfg.test_patients_per_class;
    for (int cls = 0; cls < kNumClasses; ++cls) {
        auto label = static_cast<ClassLabel>(cls);
        for (int p = 0; p < patients; ++p) {
            std::uint64_t patient_seed = mix_seed(cfg.seed, std::uint64_t(cls) * 100000 + p);
            std::string patient_id =
                std::string(class_name(label)) + "_p" + std::to_string(p);
            for (int s = 0; s < cfg.slides_per_patient; ++s) {
                auto img = synth::generate_synthetic_slide(label, patient_seed, s,
                                                           cfg.slide_height, cfg.slide_width,
                                                           cfg.patch_side);
                std::string slide_id = patient_id + "_s" + std::to_string(s);
                fs::path path = slide_dir / (slide_id + ".srh");
                io::write_slide(img, path);
                manifest.entries.push_back(
                    {path.string(), patient_id, slide_id, label,
                     p % 2 == 0 ? "center_a" : "center_b"});
            }
        }
    }
    manifest.validate();
    io::write_manifest(manifest, fs::path(cfg.out_dir) / "manifest.json");
    std::cout << "wrote " << manifest.entries.size() << " slides and manifest to " << cfg.out_dir
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// shared dataset assembly
// ---------------------------------------------------------------------------

std::vector<preprocess::Patch> load_training_patches(const RunConfig& cfg,
                                                     const io::DatasetManifest& manifest,
                                                     const io::SplitSpec& split) {
    std::vector<preprocess::Patch> patches;
    for (const auto& e : manifest.entries) {
        if (!split.train_patients.count(e.patient_id)) continue;
        auto img = preprocess::to_three_channel(io::read_slide(e.slide_path));
        auto tiles = preprocess::tile(img, cfg.patch_side, cfg.patch_side, e.slide_id,
                                      e.patient_id, e.label);
        for (auto& t : tiles) {
            // the filter drops acellular patches from training, except for
            // slides whose ground truth is nondiagnostic
            if (e.label != ClassLabel::Nondiagnostic &&
                preprocess::filter_patch(t, cfg.filter) ==
                    preprocess::FilterDecision::Nondiagnostic)
                continue;
            patches.push_back(std::move(t));
        }
    }
    if (patches.empty()) throw ContractError("no training patches after filtering");
    return patches;
}

fs::path checkpoint_path(const RunConfig& cfg, const std::string& objective, bool probed) {
    return fs::path(cfg.out_dir) /
           ("ckpt_" + objective + (probed ? "_probe" : "") + ".srhckpt");
}

// ---------------------------------------------------------------------------
// train / probe / eval / segment / embed
// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
    write_resolved_config(cfg);
    auto manifest = io::read_manifest(fs::path(cfg.out_dir) / "manifest.json");
    auto split = io::split_by_patient(manifest, cfg.test_fraction(), cfg.seed);
    auto patches = load_training_patches(cfg, manifest, split);

    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    auto ckpt = train::train_extractor(patches, tc, cfg.net);
    auto path = checkpoint_path(cfg, train::objective_name(tc.objective), false);
    train::save_checkpoint(ckpt, path);
    std::cout << "wrote " << path.string() << " (" << patches.size() << " training patches)\n";
    return 0;
}

int cmd_probe(const RunConfig& cfg) {
    auto manifest = io::read_manifest(fs::path(cfg.out_dir) / "manifest.json");
    auto split = io::split_by_patient(manifest, cfg.test_fraction(), cfg.seed);
    auto patches = load_training_patches(cfg, manifest, split);

    auto base = train::load_checkpoint(
        checkpoint_path(cfg, train::objective_name(cfg.train.objective), false));
    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    auto ckpt = train::train_linear_probe(base, patches, tc);
    auto path = checkpoint_path(cfg, train::objective_name(tc.objective), true);
    train::save_checkpoint(ckpt, path);
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

train::Checkpoint load_probed_checkpoint(const RunConfig& cfg) {
    const std::string obj = train::objective_name(cfg.train.objective);
    auto probed = checkpoint_path(cfg, obj, true);
    auto plain = checkpoint_path(cfg, obj, false);
    auto path = fs::exists(probed) ? probed : plain;
    auto ckpt = train::load_checkpoint(path);
    if (!ckpt.has_probe)
        throw ContractError("checkpoint has no probe; run the probe command first: " +
                            path.string());
    return ckpt;
}

int cmd_eval(const RunConfig& cfg) {
    auto manifest = io::read_manifest(fs::path(cfg.out_dir) / "manifest.json");
    auto split = io::split_by_patient(manifest, cfg.test_fraction(), cfg.seed);
    auto ckpt = load_probed_checkpoint(cfg);

    eval::EvalOptions options;
    options.patch_side = cfg.patch_side;
    options.filter = cfg.filter;
    auto report = eval::evaluate_testset(ckpt, manifest, split, options);

    const std::string obj = train::objective_name(cfg.train.objective);
    std::ofstream jf(fs::path(cfg.out_dir) / ("report_" + obj + ".json"));
    jf << report.to_json() << "\n";
    std::ofstream tf(fs::path(cfg.out_dir) / ("report_" + obj + ".txt"));
    tf << report.to_text(obj);
    std::cout << report.to_text(obj);
    return 0;
}

int cmd_segment(const RunConfig& cfg, const std::string& slide_path) {
    auto ckpt = load_probed_checkpoint(cfg);
    auto slide = preprocess::to_three_channel(io::read_slide(slide_path));
    auto heatmap =
        segment::probability_heatmap(slide, ckpt, cfg.patch_side, cfg.effective_stride());
    auto view = segment::two_channel_view(heatmap);

    fs::path out = fs::path(cfg.out_dir) / "segment";
    fs::create_directories(out);
    const std::size_t plane = slide.plane_size();
    auto to_u16 = [&](const std::vector<float>& p) {
        std::vector<std::uint16_t> v(plane);
        for (std::size_t i = 0; i < plane; ++i)
            v[i] = std::uint16_t(std::clamp(p[i], 0.0f, 1.0f) * 65535.0f);
        return v;
    };
    png::write_file(png::encode_gray16(slide.width, slide.height, to_u16(view.tumor)),
                    out / "tumor_prob.png");
    png::write_file(png::encode_gray16(slide.width, slide.height, to_u16(view.nontumor)),
                    out / "nontumor_prob.png");
    png::write_file(segment::render_overlay(slide, heatmap, view, cfg.segment_alpha),
                    out / "overlay.png");

    json sidecar = {{"tumor_class", class_name(view.tumor_class)},
                    {"nontumor_class", class_name(view.nontumor_class)},
                    {"stride", cfg.effective_stride()},
                    {"patch_side", cfg.patch_side},
                    {"coverage_fraction", heatmap.coverage_fraction()},
                    {"slide", slide_path}};
    std::ofstream sf(out / "sidecar.json");
    sf << sidecar.dump(2) << "\n";
    std::cout << "segment: tumor=" << class_name(view.tumor_class)
              << " nontumor=" << class_name(view.nontumor_class) << " -> " << out.string()
              << "\n";
    return 0;
}

int cmd_embed(const RunConfig& cfg) {
    auto manifest = io::read_manifest(fs::path(cfg.out_dir) / "manifest.json");
    auto split = io::split_by_patient(manifest, cfg.test_fraction(), cfg.seed);
    auto ckpt = load_probed_checkpoint(cfg);

    // class-stratified reservoir of test-split patches, capped at max_points
    std::map<int, std::vector<preprocess::Patch>> by_class;
    for (const auto& e : manifest.entries) {
        if (!split.test_patients.count(e.patient_id)) continue;
        auto img = preprocess::to_three_channel(io::read_slide(e.slide_path));
        auto tiles = preprocess::tile(img, cfg.patch_side, cfg.patch_side, e.slide_id,
                                      e.patient_id, e.label);
        auto& bucket = by_class[int(e.label)];
        bucket.insert(bucket.end(), std::make_move_iterator(tiles.begin()),
                      std::make_move_iterator(tiles.end()));
    }
    const int per_class = std::max(1, cfg.tsne_max_points / std::max<int>(1, by_class.size()));
    std::vector<preprocess::Patch> sample;
    Rng rng(mix_seed(cfg.tsne.seed, 0xe5));
    for (auto& [cls, bucket] : by_class) {
        for (std::size_t i = bucket.size(); i > 1; --i)
            std::swap(bucket[i - 1], bucket[std::size_t(rng.next_below(i))]);
        for (std::size_t i = 0; i < std::min<std::size_t>(per_class, bucket.size()); ++i)
            sample.push_back(std::move(bucket[i]));
    }

    auto matrix = embed::extract_embeddings(ckpt, sample);
    auto result = embed::tsne(matrix.features, matrix.count, matrix.dim, cfg.tsne);
    std::ofstream out(fs::path(cfg.out_dir) / "embedding.csv");
    out << embed::export_scatter(result.coords, matrix.labels);
    std::cout << "embed: " << matrix.count << " points, KL " << result.kl_initial << " -> "
              << result.kl_final << "\n";
    return 0;
}

int cmd_all(RunConfig cfg) {
    if (int rc = cmd_gen(cfg)) return rc;
    if (int rc = cmd_train(cfg)) return rc;
    if (cfg.train.objective != train::Objective::CrossEntropy)
        if (int rc = cmd_probe(cfg)) return rc;
    if (int rc = cmd_eval(cfg)) return rc;

    // margin fixture for the heatmap stage
    auto margin = synth::generate_synthetic_margin_slide(
        ClassLabel::Meningioma, ClassLabel::Nondiagnostic, cfg.seed, 6 * cfg.patch_side,
        6 * cfg.patch_side, 0.5, cfg.patch_side);
    fs::path margin_path = fs::path(cfg.out_dir) / "margin_fixture.srh";
    io::write_slide(margin.slide, margin_path);
    write_mask_pgm(margin.mask, fs::path(cfg.out_dir) / "margin_fixture_mask.pgm");
    if (int rc = cmd_segment(cfg, margin_path.string())) return rc;

    return cmd_embed(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SRH skull-base tumor pipeline (synthetic desk-scale cohort)"};
    app.require_subcommand(1);

    std::string config_path, objective, out_dir, slide_path, ckpt_override;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;

    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--objective", objective, "ce | simclr | supcon (overrides config)");
    app.add_option("--seed", seed, "global seed (overrides config)");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_flag("--deterministic", deterministic, "single-threaded numeric paths");

    auto* gen = app.add_subcommand("gen", "generate the synthetic cohort and manifest");
    auto* train_cmd = app.add_subcommand("train", "train the feature extractor");
    auto* probe = app.add_subcommand("probe", "train the linear probe on a frozen extractor");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate on the held-out patient split");
    auto* seg = app.add_subcommand("segment", "probability heatmap + overlay for one slide");
    seg->add_option("--slide", slide_path, "SRH1 slide file")->required();
    auto* emb = app.add_subcommand("embed", "tSNE scatter of test-set patch representations");
    auto* all = app.add_subcommand("all", "run the full pipeline end to end");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        if (!objective.empty()) cfg.train.objective = train::objective_from_name(objective);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (deterministic) cfg.deterministic = true;

        if (const char* threads = std::getenv("SRH_THREADS"))
            nn::set_blas_threads(std::max(1, std::atoi(threads)));
        if (cfg.deterministic) nn::set_blas_threads(1);

        if (gen->parsed()) return cmd_gen(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (probe->parsed()) return cmd_probe(cfg);
        if (eval_cmd->parsed()) return cmd_eval(cfg);
        if (seg->parsed()) return cmd_segment(cfg, slide_path);
        if (emb->parsed()) return cmd_embed(cfg);
        if (all->parsed()) return cmd_all(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
