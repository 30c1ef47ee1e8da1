// Acceptance gate. Each criterion is a self-contained check that prints one
// PASS/FAIL line; the exit code is 0 only if the requested criterion passes.
// Usage: acceptance <criterion 1..9>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "octseg/octseg.hpp"

namespace fs = std::filesystem;
using namespace octseg;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Weighted L1 degenerates to plain L1 at alpha = 1; worked example is exact.

Outcome criterion_1() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> dim(1, 12);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    std::bernoulli_distribution coin(0.5);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int rows = dim(rng), cols = dim(rng);
        Image a(rows, cols), b(rows, cols);
        for (auto& v : a.v) v = val(rng);
        for (auto& v : b.v) v = val(rng);
        WeightMask w;
        w.shift_px = 5;
        w.pixels = ByteMask(rows, cols);
        for (auto& v : w.pixels.v) v = coin(rng) ? 1 : 0;
        worst = std::max(worst, std::abs(weighted_l1_loss(a, b, w, 1.0) - l1_loss(a, b)));
    }

    Image y_t(2, 2), y_f(2, 2);
    y_t.v = {0.0, 0.5, 1.0, 0.0};
    y_f.v = {0.2, 0.5, 0.6, 0.4};
    WeightMask w;
    w.pixels = ByteMask(2, 2);
    w.pixels.v = {1, 1, 0, 0};
    const double example = weighted_l1_loss(y_t, y_f, w, 10.0);

    const double elapsed = seconds_since(t0);
    const bool pass = worst <= 1e-9 && example == 0.7 && elapsed < 1.0;
    return {pass, "worst |wl1 - l1| = " + fmt(worst) + ", example = " + fmt(example) + ", " + fmt(elapsed) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients through a small generator match central differences.

struct GradCheck {
    double worst_rel = 0.0;
    long checked = 0;

    void compare(const std::vector<std::vector<double>>& analytic, nn::GeneratorModel& gen,
                 const std::function<double()>& eval) {
        constexpr double kEps = 1e-5;
        auto params = gen.params();
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            for (std::size_t j = 0; j < params[pi]->w.size(); ++j) {
                const double saved = params[pi]->w[j];
                params[pi]->w[j] = saved + kEps;
                const double up = eval();
                params[pi]->w[j] = saved - kEps;
                const double down = eval();
                params[pi]->w[j] = saved;
                const double fd = (up - down) / (2.0 * kEps);
                const double a = analytic[pi][j];
                const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
                worst_rel = std::max(worst_rel, rel);
                ++checked;
            }
        }
    }
};

std::vector<std::vector<double>> snapshot_grads(nn::GeneratorModel& gen) {
    std::vector<std::vector<double>> out;
    for (auto* p : gen.params()) out.push_back(p->g);
    return out;
}

Outcome criterion_2() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> pm1(-1.0, 1.0), u01(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    nn::GeneratorConfig gcfg;
    gcfg.levels = 1;
    gcfg.base_width = 2;
    gcfg.dilation_rates = {1};
    gcfg.dropout_rate = 0.0;
    gcfg.seed = 42;
    nn::GeneratorModel gen(gcfg);

    nn::Tensor x(2, 8, 8);
    for (auto& v : x.v) v = pm1(rng);

    Image target01(8, 8);
    for (auto& v : target01.v) v = u01(rng);
    WeightMask w;
    w.shift_px = 50;
    w.pixels = ByteMask(8, 8);
    for (auto& v : w.pixels.v) v = coin(rng) ? 1 : 0;
    const double alpha = 10.0;

    nn::Tensor mse_target(1, 8, 8);
    for (auto& v : mse_target.v) v = u01(rng);

    nn::DiscriminatorConfig dcfg;
    dcfg.in_channels = 3;
    dcfg.layers = 1;
    dcfg.base_width = 4;
    dcfg.seed = 7;
    nn::PatchDiscriminator disc(dcfg);

    GradCheck check;

    // generator output is in [-1,1]; the reconstruction loss compares in [0,1]
    auto to01 = [](const nn::Tensor& y) {
        Image img(y.h, y.w);
        for (std::size_t i = 0; i < img.v.size(); ++i) img.v[i] = 0.5 * (y.v[i] + 1.0);
        return img;
    };

    auto eval_wl1 = [&] { return weighted_l1_loss(target01, to01(gen.forward(x, false)), w, alpha); };
    {
        for (auto* p : gen.params()) p->zero_grad();
        const nn::Tensor y = gen.forward(x, false);
        const Image grad01 = weighted_l1_grad(target01, to01(y), w, alpha);
        nn::Tensor dy(1, 8, 8);
        for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] = 0.5 * grad01.v[i];
        gen.backward(dy);
        check.compare(snapshot_grads(gen), gen, eval_wl1);
    }

    auto eval_mse = [&] { return mse_loss(gen.forward(x, false), mse_target); };
    {
        for (auto* p : gen.params()) p->zero_grad();
        const nn::Tensor y = gen.forward(x, false);
        gen.backward(mse_grad(y, mse_target));
        check.compare(snapshot_grads(gen), gen, eval_mse);
    }

    auto eval_adv = [&] {
        const nn::Tensor d = disc.forward(nn::concat_channels(x, gen.forward(x, false)));
        return adversarial_loss(d, d).loss_g_adv;
    };
    {
        for (auto* p : gen.params()) p->zero_grad();
        const nn::Tensor y = gen.forward(x, false);
        const nn::Tensor d = disc.forward(nn::concat_channels(x, y));
        const nn::Tensor dx_full = disc.backward(adversarial_grad_fake_for_g(d));
        nn::Tensor dy(1, 8, 8);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) dy.at(0, r, c) = dx_full.at(x.ch, r, c);
        gen.backward(dy);
        check.compare(snapshot_grads(gen), gen, eval_adv);
    }

    const double elapsed = seconds_since(t0);
    const bool pass = check.worst_rel <= 1e-3 && elapsed < 60.0;
    return {pass, "worst rel err " + fmt(check.worst_rel) + " over " + std::to_string(check.checked) +
                      " weights, " + fmt(elapsed) + " s"};
}

// ---------------------------------------------------------------------------
// 3. Mask construction matches per-pixel loop oracles bit-exactly.

Outcome criterion_3() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> wdist(3, 24), hdist(55, 90);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int shift = 50;
    int clamped_columns = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int width = wdist(rng), height = hdist(rng);
        AnnotationCurve ann;
        ann.rows.resize(width);
        std::uniform_int_distribution<int> rdist(0, height - 1);
        for (auto& r : ann.rows) r = rdist(rng);

        BScan scan;
        scan.pixels = Image(height, width);
        for (auto& v : scan.pixels.v) v = u01(rng);

        const WeightMask w = make_weight_mask(ann, height, shift);
        const BinaryMask label = make_binary_label(ann, height);
        const PreSegImage gold = make_gold_preseg(scan, ann);

        if (w.shift_px != shift) return {false, "weight mask lost its shift"};
        for (int c = 0; c < width; ++c) {
            int shifted = ann.rows[c] + shift;
            if (shifted > height - 1) {
                shifted = height - 1;
                ++clamped_columns;
            }
            for (int r = 0; r < height; ++r) {
                const std::uint8_t want_w = r < shifted ? 1 : 0;
                const std::uint8_t want_l = r >= ann.rows[c] ? 1 : 0;
                const double want_g = r < ann.rows[c] ? 0.0 : scan.pixels.at(r, c);
                if (w.pixels.at(r, c) != want_w)
                    return {false, "weight mask mismatch at trial " + std::to_string(trial)};
                if (label.pixels.at(r, c) != want_l)
                    return {false, "binary label mismatch at trial " + std::to_string(trial)};
                if (gold.pixels.at(r, c) != want_g)
                    return {false, "gold pre-segmentation mismatch at trial " + std::to_string(trial)};
            }
        }
    }
    if (clamped_columns == 0) return {false, "no column exercised the bottom clamp"};
    return {true, "200 annotations bit-exact, " + std::to_string(clamped_columns) + " clamped columns"};
}

// ---------------------------------------------------------------------------
// 4. Boundary metrics match brute-force point-set implementations.

Outcome criterion_4() {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> wdist(2, 40);
    std::uniform_real_distribution<double> rowdist(0.0, 60.0), sp(0.5, 8.0);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int width = wdist(rng);
        InterfaceCurve g, s;
        g.rows.resize(width);
        s.rows.resize(width);
        for (auto& v : g.rows) v = rowdist(rng);
        for (auto& v : s.rows) v = rowdist(rng);
        const double ax = sp(rng), lat = sp(rng);

        double brute_mad = 0.0;
        for (int i = 0; i < width; ++i) brute_mad += std::abs(std::floor(g.rows[i]) - std::floor(s.rows[i]));
        brute_mad /= width;

        auto points = [&](const InterfaceCurve& c) {
            std::vector<std::pair<double, double>> out;
            for (int i = 0; i < width; ++i) out.emplace_back(i * lat, c.rows[i] * ax);
            return out;
        };
        const auto pg = points(g), ps = points(s);
        auto directed = [](const std::vector<std::pair<double, double>>& a,
                           const std::vector<std::pair<double, double>>& b) {
            double sup = 0.0;
            for (const auto& [xa, ya] : a) {
                double inf = std::numeric_limits<double>::infinity();
                for (const auto& [xb, yb] : b) inf = std::min(inf, std::hypot(xa - xb, ya - yb));
                sup = std::max(sup, inf);
            }
            return sup;
        };
        const double brute_hd = std::max(directed(pg, ps), directed(ps, pg));

        worst = std::max(worst, std::abs(madlbp(g, s) - brute_mad));
        worst = std::max(worst, std::abs(hausdorff(g, s, ax, lat) - brute_hd));
    }

    InterfaceCurve ga, sa;
    ga.rows = {10.0, 10.0, 11.0, 12.0};
    sa.rows = {10.0, 12.0, 11.0, 10.0};
    InterfaceCurve gb, sb;
    gb.rows = {0.0, 0.0, 0.0};
    sb.rows = {0.0, 3.0, 0.0};
    const double mad_example = madlbp(ga, sa);
    const double hd_example = hausdorff(gb, sb, 1.0, 1.0);

    const bool pass = worst <= 1e-9 && mad_example == 1.0 && hd_example == 3.0;
    return {pass, "worst |metric - brute| = " + fmt(worst) + ", examples " + fmt(mad_example) + " px / " +
                      fmt(hd_example)};
}

// ---------------------------------------------------------------------------
// 5. Round trips: tiling, label extraction, affine curve fitting.

Outcome criterion_5() {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> wdist(1, 150);
        const int width = wdist(rng);
        std::uniform_int_distribution<int> tdist(1, width);
        const int tile = tdist(rng);
        std::uniform_int_distribution<int> hdist(2, 20);
        BScan scan;
        scan.id = "t" + std::to_string(trial);
        scan.pixels = Image(hdist(rng), width);
        for (auto& v : scan.pixels.v) v = u01(rng);
        const Image back = reassemble(slice_widthwise(scan, tile), width);
        if (back.v != scan.pixels.v)
            return {false, "slice/reassemble not identity at width " + std::to_string(width) + ", tile " +
                               std::to_string(tile)};
    }

    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> wdist(1, 40), hdist(4, 40);
        const int width = wdist(rng), height = hdist(rng);
        AnnotationCurve ann;
        ann.rows.resize(width);
        std::uniform_int_distribution<int> rdist(0, height - 1);
        for (auto& r : ann.rows) r = rdist(rng);
        const auto raw = extract_interface(make_binary_label(ann, height));
        if (static_cast<int>(raw.size()) != width) return {false, "extracted interface has wrong width"};
        for (int c = 0; c < width; ++c)
            if (raw[c] != static_cast<double>(ann.rows[c]))
                return {false, "extract(label) lost the annotation at trial " + std::to_string(trial)};
    }

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> wdist(5, 64), robdist(0, 3);
        std::uniform_real_distribution<double> adist(-5.0, 50.0), bdist(-0.4, 0.4), fdist(0.15, 0.6);
        const int width = wdist(rng);
        const double a = adist(rng), b = bdist(rng);
        std::vector<double> raw(width);
        for (int i = 0; i < width; ++i) raw[i] = a + b * i;
        const InterfaceCurve fit = fit_curve(raw, fdist(rng), robdist(rng));
        for (int i = 0; i < width; ++i) worst = std::max(worst, std::abs(fit.rows[i] - raw[i]));
    }

    const bool pass = worst <= 1e-9;
    return {pass, "tiling and label round trips exact, worst affine fit error " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 6. The stopping rule matches a naive restatement of the schedule contract.

Outcome criterion_6() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> len_dist(1, 60);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    long stops = 0, halves = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int len = len_dist(rng);
        std::vector<double> losses;
        double best_seen = std::numeric_limits<double>::infinity();
        for (int i = 0; i < len; ++i) {
            const double roll = u01(rng);
            double loss;
            if (!losses.empty() && roll < 0.35)
                loss = losses.back();  // exact plateau
            else if (std::isfinite(best_seen) && roll < 0.45)
                loss = best_seen - 1e-6;  // exactly min_delta better: not an improvement
            else if (std::isfinite(best_seen) && roll < 0.55)
                loss = best_seen - 2e-6;  // just past min_delta: improvement
            else
                loss = 0.1 + 2.0 * u01(rng);
            losses.push_back(loss);
            best_seen = std::min(best_seen, loss);
        }

        // reference: recompute the stagnation count from scratch each epoch;
        // the k-th stagnant epoch stops at k = patience and halves whenever
        // k is a positive multiple of the halving patience
        double ref_best = std::numeric_limits<double>::infinity();
        int ref_best_epoch = 0, ref_stop_epoch = 0, ref_stagnant = 0;
        double ref_lr = 1e-3;
        std::string ref_trace;
        for (int e = 1; e <= len; ++e) {
            const double loss = losses[e - 1];
            if (loss < ref_best - 1e-6) {
                ref_best = loss;
                ref_best_epoch = e;
                ref_stagnant = 0;
                ref_trace += 'I';
                continue;
            }
            ++ref_stagnant;
            if (ref_stagnant >= 10) {
                ref_stop_epoch = e;
                ref_trace += 'S';
                break;
            }
            if (ref_stagnant % 5 == 0) {
                ref_lr /= 2.0;
                ref_trace += 'H';
            } else {
                ref_trace += '-';
            }
        }

        StoppingRule rule;
        rule.min_delta = 1e-6;
        rule.early_stop_patience = 10;
        rule.lr_halving_patience = 5;
        double lr = 1e-3;
        int stop_epoch = 0;
        std::string trace;
        for (int e = 1; e <= len; ++e) {
            const auto d = rule.observe(e, losses[e - 1]);
            if (d.improved) {
                trace += 'I';
            } else if (d.stop) {
                trace += 'S';
                stop_epoch = e;
                break;
            } else if (d.halve) {
                trace += 'H';
                lr *= 0.5;
            } else {
                trace += '-';
            }
        }

        if (trace != ref_trace || lr != ref_lr || stop_epoch != ref_stop_epoch || rule.best != ref_best ||
            rule.best_epoch != ref_best_epoch)
            return {false, "divergence at sequence " + std::to_string(trial) + " (trace " + trace + " vs " +
                               ref_trace + ")"};
        stops += stop_epoch > 0;
        halves += std::count(trace.begin(), trace.end(), 'H');
    }
    if (stops == 0 || halves == 0) return {false, "sequences never exercised stop/halve"};
    return {true, "1000 sequences identical; " + std::to_string(stops) + " stops, " + std::to_string(halves) +
                      " halvings"};
}

// ---------------------------------------------------------------------------
// 7 and 8 share the in-memory experiment pipeline.

std::vector<CorpusEntry> synth_corpus(const ExperimentConfig& cfg) {
    const auto specs = build_corpus_specs(cfg.phantom, cfg.seeds.corpus);
    std::vector<CorpusEntry> out;
    out.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto [scan, ann] = generate_phantom(specs[i]);
        CorpusEntry e;
        e.id = "phantom_" + std::to_string(i);
        e.scan = std::move(scan);
        e.scan.id = e.id;
        e.annotation = std::move(ann);
        e.split = static_cast<int>(i) < cfg.phantom.train_count ? "train" : "test";
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<CorpusEntry> split_of(const std::vector<CorpusEntry>& corpus, const std::string& split) {
    std::vector<CorpusEntry> out;
    for (const auto& e : corpus)
        if (e.split == split) out.push_back(e);
    return out;
}

struct TrainedModels {
    nn::GeneratorModel generator;
    nn::TisnModel tisn_preseg;
    nn::TisnModel tisn_direct;
};

TrainedModels train_all(const ExperimentConfig& cfg, const std::vector<CorpusEntry>& train_split,
                        std::uint64_t seed_offset) {
    TrainConfig ct = cfg.training_cgan.train;
    ct.seed = cfg.seeds.cgan + seed_offset;
    nn::GeneratorConfig gcfg = cfg.generator;
    gcfg.seed = ct.seed;
    nn::DiscriminatorConfig dcfg = cfg.discriminator;
    dcfg.seed = ct.seed + 1;
    auto cgan = train_cgan(build_cgan_dataset(train_split, cfg.dataprep), ct, gcfg, dcfg, cfg.training_cgan.loss);

    TrainConfig tt = cfg.training_tisn.train;
    tt.seed = cfg.seeds.tisn + seed_offset;
    nn::TisnConfig ncfg = cfg.tisn;
    ncfg.seed = tt.seed;
    auto with_preseg =
        train_tisn(build_tisn_dataset(train_split, cfg.dataprep, PresegSource::Generator, &cgan.generator), tt,
                   ncfg, cfg.tisn_augmentation);
    auto direct = train_tisn(build_tisn_dataset(train_split, cfg.dataprep, PresegSource::ImageReplicated, nullptr),
                             tt, ncfg, cfg.tisn_augmentation);
    return {std::move(cgan.generator), std::move(with_preseg.model), std::move(direct.model)};
}

MetricsReport score(const ExperimentConfig& cfg, const std::vector<CorpusEntry>& test_split, Baseline baseline,
                    TrainedModels& models) {
    BaselineRun run;
    run.baseline = baseline;
    run.split = cfg.evaluation.split;
    run.trad = cfg.tradseg;
    run.eval = cfg.evaluation;
    run.tile_width = cfg.dataprep.tile_width;
    BaselineModels view;
    view.generator = &models.generator;
    view.tisn = &models.tisn_preseg;
    view.tisn_direct = &models.tisn_direct;
    return run_baseline(test_split, run, view);
}

// per-image values pooled across seeds; a failed segmentation scores infinity
void pool(const MetricsReport& report, double ImageMetrics::* field, std::vector<double>& into) {
    for (const auto& r : report.rows)
        into.push_back(r.failed ? std::numeric_limits<double>::infinity() : r.*field);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig load_named_config(const std::string& name) {
    return load_experiment_config(std::string(OCTSEG_CONFIG_DIR) + "/" + name);
}

Outcome criterion_7() {
    const auto t0 = Clock::now();
    const ExperimentConfig cfg = load_named_config("severe_band.json");
    if (cfg.generator.levels != 3 || cfg.generator.base_width != 16 || cfg.dataprep.tile_width != 64 ||
        cfg.phantom.height != 128)
        return {false, "config is not the desk-scale setup"};

    const auto corpus = synth_corpus(cfg);
    if (corpus.size() != 30) return {false, "corpus is not 30 phantoms"};
    const auto train_split = split_of(corpus, "train");
    const auto test_split = split_of(corpus, "test");

    std::vector<double> hd_twops, hd_twps, hd_dlwops, hd_dlwps;
    std::ostringstream per_seed;
    for (std::uint64_t k = 0; k < 3; ++k) {
        TrainedModels models = train_all(cfg, train_split, 7919 * k);
        std::vector<double> s_twops, s_twps, s_dlwops, s_dlwps;
        pool(score(cfg, test_split, Baseline::Twops, models), &ImageMetrics::hd_um, s_twops);
        pool(score(cfg, test_split, Baseline::Twps, models), &ImageMetrics::hd_um, s_twps);
        pool(score(cfg, test_split, Baseline::Dlwops, models), &ImageMetrics::hd_um, s_dlwops);
        pool(score(cfg, test_split, Baseline::Dlwps, models), &ImageMetrics::hd_um, s_dlwps);
        per_seed << " [seed " << k << ": " << fmt(median_of(s_twops)) << "/" << fmt(median_of(s_twps)) << "/"
                 << fmt(median_of(s_dlwops)) << "/" << fmt(median_of(s_dlwps)) << " at "
                 << fmt(seconds_since(t0)) << " s]";
        hd_twops.insert(hd_twops.end(), s_twops.begin(), s_twops.end());
        hd_twps.insert(hd_twps.end(), s_twps.begin(), s_twps.end());
        hd_dlwops.insert(hd_dlwops.end(), s_dlwops.begin(), s_dlwops.end());
        hd_dlwps.insert(hd_dlwps.end(), s_dlwps.begin(), s_dlwps.end());
    }

    const double m_twops = median_of(hd_twops), m_twps = median_of(hd_twps);
    const double m_dlwops = median_of(hd_dlwops), m_dlwps = median_of(hd_dlwps);
    const double elapsed = seconds_since(t0);
    const bool pass = m_twps < m_twops && m_dlwps <= m_dlwops && elapsed <= 1800.0;
    return {pass, "median HD um: TWOPS " + fmt(m_twops) + " vs TWPS " + fmt(m_twps) + "; DLWOPS " +
                      fmt(m_dlwops) + " vs DLWPS " + fmt(m_dlwps) + "; " + fmt(elapsed) + " s" + per_seed.str()};
}

Outcome criterion_8() {
    const ExperimentConfig cfg = load_named_config("clean.json");
    const auto corpus = synth_corpus(cfg);
    const auto train_split = split_of(corpus, "train");
    const auto test_split = split_of(corpus, "test");

    TrainedModels models = train_all(cfg, train_split, 0);
    const MetricsReport report = score(cfg, test_split, Baseline::Dlwps, models);
    if (report.failure_count() != 0)
        return {false, std::to_string(report.failure_count()) + " segmentation failures on the clean test split"};
    const auto mad = aggregate(report, &ImageMetrics::madlbp_px);
    const bool pass = mad.mean <= 3.0;
    return {pass, "DLWPS MADLBP mean " + fmt(mad.mean) + " px (median " + fmt(mad.median) + ", max " +
                      fmt(mad.max) + ") over " + std::to_string(mad.n) + " images"};
}

// ---------------------------------------------------------------------------
// 9. Statistics: the t-test worked example and the comparison table shape.

Outcome criterion_9() {
    const TTestResult t = paired_t_test({2.0, 4.0, 6.0, 8.0}, {0.0, 0.0, 0.0, 0.0});
    if (std::abs(t.t - 3.872983) > 1e-3 || std::abs(t.p - 0.0305) > 1e-3)
        return {false, "t-test example gave t = " + fmt(t.t) + ", p = " + fmt(t.p)};

    auto report = [](const std::string& baseline, std::vector<double> hd, std::vector<double> mad) {
        MetricsReport r;
        r.baseline = baseline;
        for (std::size_t i = 0; i < hd.size(); ++i)
            r.rows.push_back({"img_" + std::to_string(i), "img_" + std::to_string(i), mad[i], hd[i], false});
        return r;
    };
    const std::vector<MetricsReport> reports = {
        report("TWOPS", {60.0, 55.0, 70.0, 65.0}, {6.0, 5.0, 7.0, 6.5}),
        report("TWPS", {30.0, 28.0, 35.0, 33.0}, {3.0, 2.8, 3.5, 3.2}),
        report("DLWOPS", {20.0, 18.0, 25.0, 22.0}, {2.0, 1.8, 2.5, 2.2}),
        report("DLWPS", {15.0, 14.0, 19.0, 17.0}, {1.5, 1.4, 1.9, 1.7}),
    };
    const fs::path out_dir = fs::temp_directory_path() / "octseg_acceptance_9";
    fs::remove_all(out_dir);
    fs::create_directories(out_dir);
    const ComparisonBundle bundle = compare_baselines(reports, out_dir);

    if (bundle.pairs.size() != 2 || bundle.pairs[0].label != "TC" || bundle.pairs[1].label != "DLC")
        return {false, "comparison did not produce the TC/DLC pair rows"};
    for (const auto& cmp : bundle.pairs) {
        if (cmp.madlbp_degenerate || cmp.hd_degenerate) return {false, cmp.label + " degenerated"};
        for (double p : {cmp.madlbp_test.p, cmp.hd_test.p})
            if (!(p > 0.0 && p <= 1.0)) return {false, cmp.label + " p-value out of range"};
    }
    const auto& pairs = bundle.summary.at("pairs");
    if (pairs.size() != 2) return {false, "summary table does not have 2 pair rows"};
    for (const auto& row : pairs)
        if (!row.at("madlbp").contains("p") || !row.at("hd").contains("p"))
            return {false, "summary row misses a per-metric p-value"};
    if (!fs::exists(out_dir / "summary.json")) return {false, "summary.json was not written"};

    return {true, "t = " + fmt(t.t) + ", p = " + fmt(t.p) + "; 2 pairs x 2 metrics, all p-values present"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance <criterion 1..9>\n");
        return 1;
    }
    const int n = std::atoi(argv[1]);
    Outcome (*const table[])() = {criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                  criterion_6, criterion_7, criterion_8, criterion_9};
    if (n < 1 || n > 9) {
        std::fprintf(stderr, "usage: acceptance <criterion 1..9>\n");
        return 1;
    }
    Outcome out;
    try {
        out = table[n - 1]();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s (%s)\n", n, out.pass ? "PASS" : "FAIL", out.detail.c_str());
    return out.pass ? 0 : 1;
}
