#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "octseg/octseg.hpp"

namespace fs = std::filesystem;
using namespace octseg;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string baseline = "twops";
    std::vector<std::string> checkpoints;
    bool quiet = false;
};

struct Paths {
    fs::path out, corpus, checkpoints, logs, reports, preseg, prepared;
};

Paths resolve_paths(const CliOptions& opt) {
    fs::path out = opt.out_dir;
    if (out.empty()) {
        if (const char* env = std::getenv("OCTCASCADE_OUT")) out = env;
        if (out.empty()) out = "out";
    }
    return {out,       out / "corpus", out / "checkpoints", out / "logs",
            out / "reports", out / "preseg", out / "prepared"};
}

ExperimentConfig load_config(const CliOptions& opt) {
    if (opt.config_path.empty()) throw ValidationError("--config is required for this subcommand");
    ExperimentConfig cfg = load_experiment_config(opt.config_path);
    if (opt.seed) {
        cfg.seeds.corpus = *opt.seed;
        cfg.seeds.cgan = *opt.seed;
        cfg.seeds.tisn = *opt.seed;
    }
    return cfg;
}

void say(const CliOptions& opt, const std::string& msg) {
    if (!opt.quiet) std::cout << msg << "\n";
}

DatasetManifest read_corpus_manifest(const Paths& paths) {
    const fs::path manifest = paths.corpus / "manifest.json";
    if (!fs::exists(manifest))
        throw RuntimeFailure("missing corpus manifest " + manifest.string() + " (run synth first)");
    return read_manifest(manifest.string());
}

std::vector<CorpusEntry> load_split(const Paths& paths, const ExperimentConfig& cfg, const std::string& split) {
    return load_corpus(read_corpus_manifest(paths), split, cfg.evaluation.axial_spacing_um,
                       cfg.evaluation.lateral_spacing_um);
}

std::string tisn_checkpoint_name(PresegSource source) {
    switch (source) {
        case PresegSource::Gold: return "tisn_gold.ckpt";
        case PresegSource::Generator: return "tisn_generator.ckpt";
        case PresegSource::ImageReplicated: return "tisn_image.ckpt";
    }
    throw ValidationError("unknown pre-segmentation source");
}

std::string sidecar_kind(const std::string& ckpt_path) {
    std::ifstream in(ckpt_path + ".json");
    if (!in) throw RuntimeFailure("missing checkpoint sidecar " + ckpt_path + ".json");
    nlohmann::json j;
    in >> j;
    return j.at("kind").get<std::string>();
}

// Loaded models for inference subcommands. Explicit --checkpoint paths are
// sorted into slots by their sidecar kind; defaults come from out/checkpoints.
struct LoadedModels {
    std::unique_ptr<nn::GeneratorModel> generator;
    std::unique_ptr<nn::TisnModel> tisn;
    BaselineModels view(Baseline b) {
        BaselineModels m;
        m.generator = generator.get();
        if (b == Baseline::Dlwops)
            m.tisn_direct = tisn.get();
        else
            m.tisn = tisn.get();
        return m;
    }
};

void require_checkpoint(const fs::path& p) {
    if (!fs::exists(p)) throw RuntimeFailure("missing checkpoint " + p.string() + " (train it first)");
}

LoadedModels load_models(const CliOptions& opt, const Paths& paths, const ExperimentConfig& cfg, Baseline baseline) {
    const bool need_gen = baseline == Baseline::Twps || baseline == Baseline::Dlwps;
    const bool need_tisn = baseline == Baseline::Dlwops || baseline == Baseline::Dlwps;
    LoadedModels models;
    for (const auto& path : opt.checkpoints) {
        require_checkpoint(path);
        const std::string kind = sidecar_kind(path);
        if (kind == "generator")
            models.generator = std::make_unique<nn::GeneratorModel>(nn::load_generator(path));
        else if (kind == "tisn")
            models.tisn = std::make_unique<nn::TisnModel>(nn::load_tisn(path));
        else
            throw ValidationError("checkpoint " + path + " has unusable kind '" + kind + "'");
    }
    if (need_gen && !models.generator) {
        const fs::path p = paths.checkpoints / "generator.ckpt";
        require_checkpoint(p);
        models.generator = std::make_unique<nn::GeneratorModel>(nn::load_generator(p.string()));
    }
    if (need_tisn && !models.tisn) {
        const PresegSource source =
            baseline == Baseline::Dlwops ? PresegSource::ImageReplicated : cfg.training_tisn.preseg_source;
        const fs::path p = paths.checkpoints / tisn_checkpoint_name(source);
        require_checkpoint(p);
        models.tisn = std::make_unique<nn::TisnModel>(nn::load_tisn(p.string()));
    }
    return models;
}

BaselineRun make_run(const ExperimentConfig& cfg, Baseline baseline, const fs::path& out_dir) {
    BaselineRun run;
    run.baseline = baseline;
    run.split = cfg.evaluation.split;
    run.trad = cfg.tradseg;
    run.eval = cfg.evaluation;
    run.tile_width = cfg.dataprep.tile_width;
    run.out_dir = out_dir;
    return run;
}

int cmd_synth(const CliOptions& opt) {
    const auto cfg = load_config(opt);
    const auto paths = resolve_paths(opt);
    const auto specs = build_corpus_specs(cfg.phantom, cfg.seeds.corpus);
    const auto manifest = generate_corpus(specs, paths.corpus.string(), cfg.phantom.train_count);
    say(opt, "synth: wrote " + std::to_string(manifest.entries.size()) + " phantoms to " + paths.corpus.string());
    return 0;
}

int cmd_prepare(const CliOptions& opt) {
    const auto cfg = load_config(opt);
    const auto paths = resolve_paths(opt);
    const auto corpus = load_split(paths, cfg, "train");
    if (corpus.empty()) throw RuntimeFailure("prepare: train split is empty");
    const fs::path images = paths.prepared / "images";
    const fs::path gold = paths.prepared / "gold";
    const fs::path weights = paths.prepared / "weights";
    for (const auto& d : {images, gold, weights}) fs::create_directories(d);
    std::size_t n = 0;
    for (const auto& entry : corpus) {
        for (const auto& tile : slice_widthwise(entry.scan, cfg.dataprep.tile_width)) {
            const auto tile_ann = slice_annotation(entry.annotation, tile.column_offset, cfg.dataprep.tile_width);
            BScan tile_scan;
            tile_scan.pixels = tile.pixels;
            const std::string stem = entry.id + "_c" + std::to_string(tile.column_offset) + ".png";
            write_png16((images / stem).string(), tile.pixels);
            write_png16((gold / stem).string(), make_gold_preseg(tile_scan, tile_ann).pixels);
            write_png8((weights / stem).string(), make_weight_mask(tile_ann, tile.pixels.rows, cfg.dataprep.shift_px).pixels);
            ++n;
        }
    }
    say(opt, "prepare: wrote " + std::to_string(n) + " training tiles under " + paths.prepared.string());
    return 0;
}

int cmd_train_cgan(const CliOptions& opt) {
    const auto cfg = load_config(opt);
    const auto paths = resolve_paths(opt);
    const auto corpus = load_split(paths, cfg, "train");
    const auto dataset = build_cgan_dataset(corpus, cfg.dataprep);
    TrainConfig train = cfg.training_cgan.train;
    train.seed = cfg.seeds.cgan;
    nn::GeneratorConfig gen_cfg = cfg.generator;
    gen_cfg.seed = cfg.seeds.cgan;
    nn::DiscriminatorConfig disc_cfg = cfg.discriminator;
    disc_cfg.seed = cfg.seeds.cgan + 1;
    auto result = train_cgan(dataset, train, gen_cfg, disc_cfg, cfg.training_cgan.loss);
    fs::create_directories(paths.checkpoints);
    fs::create_directories(paths.logs);
    nn::save_checkpoint(result.generator, (paths.checkpoints / "generator.ckpt").string(), train.seed);
    write_train_log_csv((paths.logs / "cgan_log.csv").string(), result.log);
    write_train_log_json((paths.logs / "cgan_log.json").string(), result.log);
    say(opt, "train-cgan: " + std::to_string(result.log.records.size()) + " epochs, best validation " +
                 std::to_string(result.log.best_validation_loss) + ", stop reason " + result.log.stop_reason);
    return 0;
}

int cmd_train_tisn(const CliOptions& opt) {
    const auto cfg = load_config(opt);
    const auto paths = resolve_paths(opt);
    const auto corpus = load_split(paths, cfg, "train");
    std::unique_ptr<nn::GeneratorModel> generator;
    if (cfg.training_tisn.preseg_source == PresegSource::Generator) {
        fs::path p = paths.checkpoints / "generator.ckpt";
        for (const auto& c : opt.checkpoints)
            if (fs::exists(c) && sidecar_kind(c) == "generator") p = c;
        require_checkpoint(p);
        generator = std::make_unique<nn::GeneratorModel>(nn::load_generator(p.string()));
    }
    const auto dataset = build_tisn_dataset(corpus, cfg.dataprep, cfg.training_tisn.preseg_source, generator.get());
    TrainConfig train = cfg.training_tisn.train;
    train.seed = cfg.seeds.tisn;
    nn::TisnConfig net_cfg = cfg.tisn;
    net_cfg.seed = cfg.seeds.tisn;
    auto result = train_tisn(dataset, train, net_cfg, cfg.tisn_augmentation);
    fs::create_directories(paths.checkpoints);
    fs::create_directories(paths.logs);
    const std::string name = tisn_checkpoint_name(cfg.training_tisn.preseg_source);
    nn::save_checkpoint(result.model, (paths.checkpoints / name).string(), train.seed);
    const std::string log_stem = name.substr(0, name.size() - 5) + "_log";
    write_train_log_csv((paths.logs / (log_stem + ".csv")).string(), result.log);
    write_train_log_json((paths.logs / (log_stem + ".json")).string(), result.log);
    say(opt, "train-tisn: " + std::to_string(result.log.records.size()) + " epochs, best validation " +
                 std::to_string(result.log.best_validation_loss) + ", stop reason " + result.log.stop_reason);
    return 0;
}

int cmd_presegment(const CliOptions& opt) {
    const auto cfg = load_config(opt);
    const auto paths = resolve_paths(opt);
    auto models = load_models(opt, paths, cfg, Baseline::Twps);
    const auto corpus = load_split(paths, cfg, cfg.evaluation.split);
    fs::create_directories(paths.preseg);
    for (const auto& entry : corpus) {
        const auto preseg = presegment_image(*models.generator, entry.scan.pixels, entry.id, cfg.dataprep.tile_width);
        write_png16((paths.preseg / (entry.id + ".png")).string(), preseg.pixels);
    }
    say(opt, "presegment: wrote " + std::to_string(corpus.size()) + " images to " + paths.preseg.string());
    return 0;
}

int run_segmentation(const CliOptions& opt, Baseline baseline) {
    const auto cfg = load_config(opt);
    const auto paths = resolve_paths(opt);
    auto models = load_models(opt, paths, cfg, baseline);
    const auto corpus = load_split(paths, cfg, cfg.evaluation.split);
    if (corpus.empty()) throw RuntimeFailure("segment: selected split is empty");
    const auto run = make_run(cfg, baseline, paths.out);
    const auto report = run_baseline(corpus, run, models.view(baseline));
    fs::create_directories(paths.reports);
    write_report_csv((paths.reports / (report.baseline + ".csv")).string(), report);
    say(opt, report.baseline + ": " + std::to_string(report.rows.size()) + " images, " +
                 std::to_string(report.failure_count()) + " failures");
    return 0;
}

int cmd_evaluate(const CliOptions& opt) {
    const auto cfg = load_config(opt);
    const auto paths = resolve_paths(opt);
    const Baseline baseline = baseline_from_string(opt.baseline);
    const std::string name = baseline_name(baseline);
    const auto corpus = load_split(paths, cfg, cfg.evaluation.split);
    const fs::path curve_dir = paths.out / "curves" / name;
    if (!fs::exists(curve_dir)) throw RuntimeFailure("missing curves under " + curve_dir.string() + " (run segment first)");
    MetricsReport report;
    report.baseline = name;
    for (const auto& entry : corpus) {
        ImageMetrics row;
        row.id = entry.id;
        row.dataset = entry.id;
        const fs::path curve_path = curve_dir / (entry.id + ".json");
        if (!fs::exists(curve_path)) {
            row.failed = true;  // segmentation failed for this image; curve was never written
        } else {
            const InterfaceCurve curve = read_curve_json(curve_path.string());
            if (curve.width() != entry.scan.width())
                throw ValidationError("evaluate: curve width mismatch for " + entry.id);
            const InterfaceCurve gt = annotation_to_curve(entry.annotation);
            row.madlbp_px = madlbp(gt, curve);
            row.hd_um = hausdorff(gt, curve, cfg.evaluation.axial_spacing_um, cfg.evaluation.lateral_spacing_um);
        }
        report.rows.push_back(std::move(row));
    }
    fs::create_directories(paths.reports);
    write_report_csv((paths.reports / (name + ".csv")).string(), report);
    const auto mad = aggregate(report, &ImageMetrics::madlbp_px);
    const auto hd = aggregate(report, &ImageMetrics::hd_um);
    say(opt, name + ": median MADLBP " + std::to_string(mad.median) + " px, median HD " + std::to_string(hd.median) +
                 " um over " + std::to_string(mad.n) + " images");
    return 0;
}

int cmd_compare(const CliOptions& opt) {
    load_config(opt);  // validates the config even though only reports are read
    const auto paths = resolve_paths(opt);
    std::vector<MetricsReport> reports;
    for (const std::string name : {"TWOPS", "TWPS", "DLWOPS", "DLWPS"}) {
        const fs::path p = paths.reports / (name + ".csv");
        if (!fs::exists(p))
            throw RuntimeFailure("missing report " + p.string() + " (run segment for each baseline first)");
        reports.push_back(read_report_csv(p.string(), name));
    }
    const auto bundle = compare_baselines(reports, paths.out);
    for (const auto& cmp : bundle.pairs) {
        std::string line = cmp.label + " (" + cmp.without_name + " vs " + cmp.with_name + "): ";
        line += cmp.madlbp_degenerate ? "MADLBP p degenerate" : "MADLBP p=" + std::to_string(cmp.madlbp_test.p);
        line += cmp.hd_degenerate ? ", HD p degenerate" : ", HD p=" + std::to_string(cmp.hd_test.p);
        say(opt, line);
    }
    say(opt, "compare: summary.json and plots written under " + paths.out.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cascaded and hybrid segmentation of the shallowest tissue interface in OCT B-scans"};
    app.require_subcommand(1);
    CliOptions opt;
    app.add_option("--config", opt.config_path, "Experiment config JSON")->configurable(false);
    app.add_option("--out", opt.out_dir, "Output root (default: $OCTCASCADE_OUT or ./out)");
    app.add_option("--seed", opt.seed, "Override all stage seeds");
    app.add_option("--checkpoint", opt.checkpoints, "Checkpoint path (repeatable)");
    app.add_flag("--quiet", opt.quiet, "Suppress progress output");

    auto* synth = app.add_subcommand("synth", "Generate a phantom corpus with ground-truth annotations");
    auto* prepare = app.add_subcommand("prepare", "Write training tiles, gold pre-segmentations and weight masks");
    auto* train_cgan = app.add_subcommand("train-cgan", "Train the pre-segmentation generator adversarially");
    auto* train_tisn = app.add_subcommand("train-tisn", "Train the interface segmentation network");
    auto* presegment = app.add_subcommand("presegment", "Run the generator over a split and save pre-segmentations");
    auto* segment = app.add_subcommand("segment", "Segment a split with one baseline and write curves + report");
    segment->add_option("--baseline", opt.baseline, "twops|twps|dlwops|dlwps")->required();
    auto* hybrid = app.add_subcommand("hybrid", "Segment with the generator followed by the traditional segmenter");
    auto* evaluate = app.add_subcommand("evaluate", "Score previously written curves against ground truth");
    evaluate->add_option("--baseline", opt.baseline, "twops|twps|dlwops|dlwps")->required();
    auto* compare = app.add_subcommand("compare", "Compare the four baseline reports: t-tests, plots, summary");

    // global options may follow the subcommand: "octseg synth --config ..."
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(opt);
        if (prepare->parsed()) return cmd_prepare(opt);
        if (train_cgan->parsed()) return cmd_train_cgan(opt);
        if (train_tisn->parsed()) return cmd_train_tisn(opt);
        if (presegment->parsed()) return cmd_presegment(opt);
        if (segment->parsed()) return run_segmentation(opt, baseline_from_string(opt.baseline));
        if (hybrid->parsed()) return run_segmentation(opt, Baseline::Twps);
        if (evaluate->parsed()) return cmd_evaluate(opt);
        if (compare->parsed()) return cmd_compare(opt);
    } catch (const ValidationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const RuntimeFailure& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
