#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "octseg/config.hpp"
#include "octseg/dataio.hpp"
#include "octseg/dataprep.hpp"
#include "octseg/metrics.hpp"
#include "octseg/plots.hpp"
#include "octseg/postprocess.hpp"
#include "octseg/tradseg.hpp"
#include "octseg/training.hpp"

namespace octseg {

enum class Baseline { Twops, Twps, Dlwops, Dlwps };

inline std::string baseline_name(Baseline b) {
    switch (b) {
        case Baseline::Twops: return "TWOPS";
        case Baseline::Twps: return "TWPS";
        case Baseline::Dlwops: return "DLWOPS";
        case Baseline::Dlwps: return "DLWPS";
    }
    throw ValidationError("unknown baseline");
}

inline Baseline baseline_from_string(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "twops") return Baseline::Twops;
    if (s == "twps") return Baseline::Twps;
    if (s == "dlwops") return Baseline::Dlwops;
    if (s == "dlwps") return Baseline::Dlwps;
    throw ValidationError("unknown baseline: " + s + " (expected twops|twps|dlwops|dlwps)");
}

// ---------------------------------------------------------------------------
// Corpus loading and training-set construction.

struct CorpusEntry {
    std::string id;
    BScan scan;
    AnnotationCurve annotation;
    std::string split;
};

inline std::vector<CorpusEntry> load_corpus(const DatasetManifest& manifest, const std::string& split,
                                            double axial_um = 1.0, double lateral_um = 1.0) {
    std::vector<CorpusEntry> out;
    for (const auto& e : manifest.entries) {
        if (split != "all" && e.split != split) continue;
        CorpusEntry entry;
        entry.id = e.id;
        entry.split = e.split;
        entry.scan.pixels = read_png16(manifest.image_file(e).string());
        entry.scan.id = e.id;
        entry.scan.axial_spacing_um = axial_um;
        entry.scan.lateral_spacing_um = lateral_um;
        entry.annotation = read_annotation_json(manifest.annotation_file(e).string());
        if (entry.annotation.width() != entry.scan.width())
            throw ValidationError("corpus entry " + e.id + ": annotation width mismatch");
        entry.annotation.validate(entry.scan.height());
        out.push_back(std::move(entry));
    }
    return out;
}

inline AnnotationCurve slice_annotation(const AnnotationCurve& ann, int offset, int width) {
    AnnotationCurve out;
    out.band_halfwidth_px = ann.band_halfwidth_px;
    out.rows.assign(ann.rows.begin() + offset, ann.rows.begin() + offset + width);
    return out;
}

inline std::vector<CGanSample> build_cgan_dataset(const std::vector<CorpusEntry>& corpus, const DataPrepConfig& prep) {
    std::vector<CGanSample> samples;
    for (const auto& entry : corpus) {
        for (const auto& tile : slice_widthwise(entry.scan, prep.tile_width)) {
            const AnnotationCurve tile_ann = slice_annotation(entry.annotation, tile.column_offset, prep.tile_width);
            BScan tile_scan;
            tile_scan.pixels = tile.pixels;
            tile_scan.id = entry.id;
            CGanSample s;
            s.image = tile.pixels;
            s.gold = make_gold_preseg(tile_scan, tile_ann).pixels;
            s.w = make_weight_mask(tile_ann, tile.pixels.rows, prep.shift_px);
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

inline std::vector<TisnSample> build_tisn_dataset(const std::vector<CorpusEntry>& corpus, const DataPrepConfig& prep,
                                                  PresegSource source, nn::GeneratorModel* generator) {
    if (source == PresegSource::Generator && !generator)
        throw ValidationError("build_tisn_dataset: generator source selected but no generator supplied");
    std::vector<std::pair<Image, ByteMask>> tiles;
    std::vector<Image> presegs;
    for (const auto& entry : corpus) {
        for (const auto& tile : slice_widthwise(entry.scan, prep.tile_width)) {
            const AnnotationCurve tile_ann = slice_annotation(entry.annotation, tile.column_offset, prep.tile_width);
            tiles.emplace_back(tile.pixels, make_binary_label(tile_ann, tile.pixels.rows).pixels);
            if (source == PresegSource::Gold) {
                BScan tile_scan;
                tile_scan.pixels = tile.pixels;
                presegs.push_back(make_gold_preseg(tile_scan, tile_ann).pixels);
            } else if (source == PresegSource::ImageReplicated) {
                presegs.push_back(tile.pixels);
            }
        }
    }
    if (source == PresegSource::Generator) return build_tisn_training_inputs(tiles, *generator);
    return build_tisn_training_inputs(tiles, presegs);
}

// ---------------------------------------------------------------------------
// Full-image inference; falls back to tiling when the width is not divisible
// by the network stride (heights must always divide).

namespace detail {

inline void check_height(const Image& img, int levels) {
    if (img.rows % (1 << levels) != 0)
        throw ValidationError("inference: image height " + std::to_string(img.rows) + " not divisible by " +
                              std::to_string(1 << levels));
}

}  // namespace detail

inline PreSegImage presegment_image(nn::GeneratorModel& gen, const Image& img, const std::string& id, int tile_width) {
    detail::check_height(img, gen.cfg.levels);
    const int stride = 1 << gen.cfg.levels;
    if (img.cols % stride == 0) {
        return nn::forward_with_test_time_input(gen, img, id);
    }
    if (tile_width <= 0 || tile_width % stride != 0)
        throw ValidationError("inference: width needs tiling but tile_width is unusable");
    BScan scan;
    scan.pixels = img;
    scan.id = id;
    std::vector<Tile> out_tiles;
    for (auto& tile : slice_widthwise(scan, tile_width)) {
        Tile t = tile;
        t.pixels = nn::forward_with_test_time_input(gen, tile.pixels, id).pixels;
        out_tiles.push_back(std::move(t));
    }
    PreSegImage out;
    out.source_id = id;
    out.pixels = reassemble(out_tiles, img.cols);
    return out;
}

inline BinaryMask tisn_mask(nn::TisnModel& tisn, const Image& img, const Image& preseg, int tile_width) {
    detail::check_height(img, tisn.cfg.levels);
    require_same_shape(img, preseg, "tisn_mask");
    const int stride = 1 << tisn.cfg.levels;
    auto infer = [&](const Image& im, const Image& ps) {
        nn::Tensor x(2, im.rows, im.cols);
        for (int r = 0; r < im.rows; ++r)
            for (int c = 0; c < im.cols; ++c) {
                x.at(0, r, c) = im.at(r, c);
                x.at(1, r, c) = ps.at(r, c);
            }
        return mask_from_probabilities(tisn.forward(x, false));
    };
    if (img.cols % stride == 0) return infer(img, preseg);
    if (tile_width <= 0 || tile_width % stride != 0)
        throw ValidationError("inference: width needs tiling but tile_width is unusable");
    BScan scan_img, scan_ps;
    scan_img.pixels = img;
    scan_ps.pixels = preseg;
    const auto img_tiles = slice_widthwise(scan_img, tile_width);
    const auto ps_tiles = slice_widthwise(scan_ps, tile_width);
    std::vector<Tile> mask_tiles;
    for (std::size_t i = 0; i < img_tiles.size(); ++i) {
        const ByteMask m = infer(img_tiles[i].pixels, ps_tiles[i].pixels).pixels;
        Tile t = img_tiles[i];
        t.pixels = Image(m.rows, m.cols);
        for (std::size_t k = 0; k < m.v.size(); ++k) t.pixels.v[k] = m.v[k];
        mask_tiles.push_back(std::move(t));
    }
    const Image joined = reassemble(mask_tiles, img.cols);
    BinaryMask mask;
    mask.pixels = ByteMask(joined.rows, joined.cols);
    for (std::size_t k = 0; k < joined.v.size(); ++k) mask.pixels.v[k] = joined.v[k] >= 0.5 ? 1 : 0;
    return mask;
}

// ---------------------------------------------------------------------------
// Baseline execution.

struct BaselineModels {
    nn::GeneratorModel* generator = nullptr;
    nn::TisnModel* tisn = nullptr;         // trained with a pre-segmentation channel (DLWPS)
    nn::TisnModel* tisn_direct = nullptr;  // trained with the image replicated (DLWOPS)
};

struct BaselineRun {
    Baseline baseline = Baseline::Twops;
    std::string split = "test";
    TradConfig trad;
    EvaluationConfig eval;
    int tile_width = 0;
    std::filesystem::path out_dir;  // when set, curves land in out_dir/curves/<baseline>/
};

inline InterfaceCurve segment_one(Baseline baseline, const CorpusEntry& entry, const BaselineRun& run,
                                  const BaselineModels& models) {
    switch (baseline) {
        case Baseline::Twops:
            return trad_segment(entry.scan, run.trad);
        case Baseline::Twps: {
            if (!models.generator) throw ValidationError("TWPS requires a generator checkpoint");
            const PreSegImage preseg =
                presegment_image(*models.generator, entry.scan.pixels, entry.id, run.tile_width);
            return trad_segment(preseg, run.trad);
        }
        case Baseline::Dlwops: {
            if (!models.tisn_direct) throw ValidationError("DLWOPS requires a direct-segmentation checkpoint");
            const BinaryMask mask =
                tisn_mask(*models.tisn_direct, entry.scan.pixels, entry.scan.pixels, run.tile_width);
            return clamp_curve(
                fit_curve(extract_interface(mask), run.eval.fit_fraction, run.eval.robustness_iterations),
                entry.scan.height());
        }
        case Baseline::Dlwps: {
            if (!models.generator || !models.tisn)
                throw ValidationError("DLWPS requires both generator and TISN checkpoints");
            const PreSegImage preseg =
                presegment_image(*models.generator, entry.scan.pixels, entry.id, run.tile_width);
            const BinaryMask mask = tisn_mask(*models.tisn, entry.scan.pixels, preseg.pixels, run.tile_width);
            return clamp_curve(
                fit_curve(extract_interface(mask), run.eval.fit_fraction, run.eval.robustness_iterations),
                entry.scan.height());
        }
    }
    throw ValidationError("unknown baseline");
}

inline InterfaceCurve annotation_to_curve(const AnnotationCurve& ann) {
    InterfaceCurve gt;
    gt.rows.assign(ann.rows.begin(), ann.rows.end());
    return gt;
}

// Segments every corpus entry with the chosen baseline and scores it against
// the phantom ground truth. Per-image failures become sentinel rows rather
// than aborting the run.
inline MetricsReport run_baseline(const std::vector<CorpusEntry>& corpus, const BaselineRun& run,
                                  const BaselineModels& models) {
    MetricsReport report;
    report.baseline = baseline_name(run.baseline);
    std::filesystem::path curve_dir;
    if (!run.out_dir.empty()) {
        curve_dir = run.out_dir / "curves" / report.baseline;
        std::filesystem::create_directories(curve_dir);
    }
    for (const auto& entry : corpus) {
        ImageMetrics row;
        row.id = entry.id;
        row.dataset = entry.id;  // phantom corpora: one dataset per image
        try {
            const InterfaceCurve curve = segment_one(run.baseline, entry, run, models);
            const InterfaceCurve gt = annotation_to_curve(entry.annotation);
            row.madlbp_px = madlbp(gt, curve);
            row.hd_um = hausdorff(gt, curve, run.eval.axial_spacing_um, run.eval.lateral_spacing_um);
            if (!curve_dir.empty()) write_curve_json((curve_dir / (entry.id + ".json")).string(), entry.id, curve);
        } catch (const RuntimeFailure&) {
            row.failed = true;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Baseline comparison: TC pair (TWOPS vs TWPS) and DLC pair (DLWOPS vs
// DLWPS), max-error pairings, paired t-tests per metric, plots, summary.

struct PairComparison {
    std::string label;  // "TC" or "DLC"
    std::string without_name, with_name;
    std::vector<MaxErrorPair> pairs;
    TTestResult madlbp_test, hd_test;
    bool madlbp_degenerate = false, hd_degenerate = false;
    int n_paired = 0;
};

struct ComparisonBundle {
    std::vector<PairComparison> pairs;
    nlohmann::json summary;
};

namespace detail {

inline PairComparison compare_pair(const MetricsReport& without, const MetricsReport& with, const std::string& label) {
    PairComparison cmp;
    cmp.label = label;
    cmp.without_name = without.baseline;
    cmp.with_name = with.baseline;
    cmp.pairs = max_error_pairing(without, with);
    std::map<std::string, const ImageMetrics*> with_by_id;
    for (const auto& r : with.rows) with_by_id[r.id] = &r;
    std::vector<double> a_mad, b_mad, a_hd, b_hd;
    for (const auto& r : without.rows) {
        const auto it = with_by_id.find(r.id);
        if (it == with_by_id.end()) throw ValidationError("compare_baselines: corpora differ at id " + r.id);
        if (r.failed || it->second->failed) continue;  // failures excluded from the tests
        a_mad.push_back(r.madlbp_px);
        b_mad.push_back(it->second->madlbp_px);
        a_hd.push_back(r.hd_um);
        b_hd.push_back(it->second->hd_um);
    }
    cmp.n_paired = static_cast<int>(a_mad.size());
    try {
        cmp.madlbp_test = paired_t_test(a_mad, b_mad);
    } catch (const ValidationError&) {
        cmp.madlbp_degenerate = true;
    }
    try {
        cmp.hd_test = paired_t_test(a_hd, b_hd);
    } catch (const ValidationError&) {
        cmp.hd_degenerate = true;
    }
    return cmp;
}

inline nlohmann::json aggregate_json(const MetricsReport& r) {
    nlohmann::json j = {{"baseline", r.baseline}, {"images", r.rows.size()}, {"failures", r.failure_count()}};
    try {
        const auto mad = aggregate(r, &ImageMetrics::madlbp_px);
        const auto hd = aggregate(r, &ImageMetrics::hd_um);
        j["madlbp_px"] = {{"mean", mad.mean}, {"median", mad.median}, {"max", mad.max}, {"argmax_id", mad.argmax_id}};
        j["hd_um"] = {{"mean", hd.mean}, {"median", hd.median}, {"max", hd.max}, {"argmax_id", hd.argmax_id}};
    } catch (const ValidationError&) {
        j["all_failed"] = true;
    }
    return j;
}

inline nlohmann::json pair_json(const PairComparison& c) {
    auto test_json = [](const TTestResult& t, bool degenerate) -> nlohmann::json {
        if (degenerate) return {{"degenerate", true}};
        return {{"degenerate", false}, {"t", t.t}, {"p", t.p}, {"n", t.n}};
    };
    return {{"pair", c.label},
            {"without", c.without_name},
            {"with", c.with_name},
            {"n_paired", c.n_paired},
            {"madlbp", test_json(c.madlbp_test, c.madlbp_degenerate)},
            {"hd", test_json(c.hd_test, c.hd_degenerate)}};
}

}  // namespace detail

// reports must arrive in order TWOPS, TWPS, DLWOPS, DLWPS over one corpus.
inline ComparisonBundle compare_baselines(const std::vector<MetricsReport>& reports,
                                          const std::filesystem::path& out_dir) {
    if (reports.size() != 4) throw ValidationError("compare_baselines: need exactly 4 reports");
    const std::vector<std::string> expected = {"TWOPS", "TWPS", "DLWOPS", "DLWPS"};
    std::set<std::string> ids;
    for (std::size_t i = 0; i < 4; ++i) {
        if (reports[i].baseline != expected[i])
            throw ValidationError("compare_baselines: report " + std::to_string(i) + " is " + reports[i].baseline +
                                  ", expected " + expected[i]);
        std::set<std::string> these;
        for (const auto& r : reports[i].rows) these.insert(r.id);
        if (i == 0)
            ids = these;
        else if (these != ids)
            throw ValidationError("compare_baselines: corpora differ between baselines");
    }

    ComparisonBundle bundle;
    bundle.pairs.push_back(detail::compare_pair(reports[0], reports[1], "TC"));
    bundle.pairs.push_back(detail::compare_pair(reports[2], reports[3], "DLC"));

    const auto plot_dir = out_dir / "plots";
    std::filesystem::create_directories(plot_dir);
    std::vector<std::string> labels;
    std::vector<std::vector<double>> mad_groups, hd_groups;
    for (const auto& r : reports) {
        labels.push_back(r.baseline);
        std::vector<double> mad, hd;
        for (const auto& row : r.rows)
            if (!row.failed) {
                mad.push_back(row.madlbp_px);
                hd.push_back(row.hd_um);
            }
        mad_groups.push_back(std::move(mad));
        hd_groups.push_back(std::move(hd));
    }
    write_boxplot_svg((plot_dir / "boxplot_madlbp.svg").string(), labels, mad_groups, "Boundary position error",
                      "MADLBP (px)");
    write_boxplot_svg((plot_dir / "boxplot_hd.svg").string(), labels, hd_groups, "Hausdorff distance", "HD (um)");
    for (const auto& cmp : bundle.pairs)
        if (!cmp.pairs.empty())
            write_pairing_plot_svg((plot_dir / ("pairing_" + cmp.label + ".svg")).string(), cmp.pairs,
                                   cmp.without_name, cmp.with_name, "Worst-image HD, " + cmp.label + " pair");

    bundle.summary["baselines"] = nlohmann::json::array();
    for (const auto& r : reports) bundle.summary["baselines"].push_back(detail::aggregate_json(r));
    bundle.summary["pairs"] = nlohmann::json::array();
    for (const auto& cmp : bundle.pairs) bundle.summary["pairs"].push_back(detail::pair_json(cmp));
    std::ofstream out(out_dir / "summary.json");
    if (!out) throw RuntimeFailure("cannot open summary.json for writing");
    out << bundle.summary.dump(2) << "\n";
    return bundle;
}

}  // namespace octseg
