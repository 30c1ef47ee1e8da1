#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "octseg/dataprep.hpp"
#include "octseg/nn/models.hpp"
#include "octseg/phantom.hpp"
#include "octseg/tradseg.hpp"
#include "octseg/training.hpp"

namespace octseg {

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& section) {
    if (!j.is_object()) throw ValidationError("config: " + section + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ValidationError("config: unknown key \"" + key + "\" in " + section);
}

template <class T>
void get_if_present(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

inline void get_range(const nlohmann::json& j, const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw ValidationError(std::string("config: ") + key + " must be [lo, hi]");
    lo = v[0].get<double>();
    hi = v[1].get<double>();
    if (lo > hi) throw ValidationError(std::string("config: ") + key + " range inverted");
}

}  // namespace detail

// Parameter ranges for a randomized phantom corpus; per-phantom specs are
// drawn deterministically from the corpus seed.
struct PhantomCorpusConfig {
    int width = 64;
    int height = 128;
    int count = 30;
    int train_count = 14;
    double tissue_base_intensity = 0.55;
    double background_intensity = 0.06;
    double speckle_contrast = 0.35;
    double apex_row_frac_min = 0.2, apex_row_frac_max = 0.5;
    double curvature_min = 0.002, curvature_max = 0.02;
    int artifact_bands_min = 0, artifact_bands_max = 0;
    double artifact_amplitude_min = 0.5, artifact_amplitude_max = 0.9;
    double artifact_width_min = 2.0, artifact_width_max = 5.0;
    double snr_dropoff_rate_min = 0.0, snr_dropoff_rate_max = 0.0;
    double saturation_column_probability = 0.0;
    double band_halfwidth_px = 2.0;
    double axial_spacing_um = 3.4;
    double lateral_spacing_um = 6.0;
};

struct DataPrepConfig {
    int tile_width = 64;
    int shift_px = 50;
};

struct EvaluationConfig {
    double fit_fraction = 0.1;
    int robustness_iterations = 2;
    double axial_spacing_um = 3.4;
    double lateral_spacing_um = 6.0;
    std::string split = "test";
};

enum class PresegSource { Gold, Generator, ImageReplicated };

struct TisnTrainingSection {
    TrainConfig train = tisn_train_defaults();
    PresegSource preseg_source = PresegSource::Gold;
};

struct CganTrainingSection {
    TrainConfig train = cgan_train_defaults();
    CGanLossConfig loss;
};

struct SeedsConfig {
    std::uint64_t corpus = 1;
    std::uint64_t cgan = 2;
    std::uint64_t tisn = 3;
};

struct ExperimentConfig {
    PhantomCorpusConfig phantom;
    DataPrepConfig dataprep;
    nn::GeneratorConfig generator;
    nn::TisnConfig tisn;
    nn::DiscriminatorConfig discriminator;
    CganTrainingSection training_cgan;
    TisnTrainingSection training_tisn;
    AugmentationPolicy tisn_augmentation;  // parsed inside training_tisn
    TradConfig tradseg;
    EvaluationConfig evaluation;
    SeedsConfig seeds;
};

namespace detail {

inline void parse_phantom(const nlohmann::json& j, PhantomCorpusConfig& c) {
    check_keys(j, {"width", "height", "count", "train_count", "tissue_base_intensity", "background_intensity",
                   "speckle_contrast", "apex_row_frac", "curvature", "artifact_bands_min", "artifact_bands_max",
                   "artifact_amplitude", "artifact_width", "snr_dropoff_rate", "saturation_column_probability",
                   "band_halfwidth_px", "axial_spacing_um", "lateral_spacing_um"},
               "phantom");
    get_if_present(j, "width", c.width);
    get_if_present(j, "height", c.height);
    get_if_present(j, "count", c.count);
    get_if_present(j, "train_count", c.train_count);
    get_if_present(j, "tissue_base_intensity", c.tissue_base_intensity);
    get_if_present(j, "background_intensity", c.background_intensity);
    get_if_present(j, "speckle_contrast", c.speckle_contrast);
    get_range(j, "apex_row_frac", c.apex_row_frac_min, c.apex_row_frac_max);
    get_range(j, "curvature", c.curvature_min, c.curvature_max);
    get_if_present(j, "artifact_bands_min", c.artifact_bands_min);
    get_if_present(j, "artifact_bands_max", c.artifact_bands_max);
    get_range(j, "artifact_amplitude", c.artifact_amplitude_min, c.artifact_amplitude_max);
    get_range(j, "artifact_width", c.artifact_width_min, c.artifact_width_max);
    get_range(j, "snr_dropoff_rate", c.snr_dropoff_rate_min, c.snr_dropoff_rate_max);
    get_if_present(j, "saturation_column_probability", c.saturation_column_probability);
    get_if_present(j, "band_halfwidth_px", c.band_halfwidth_px);
    get_if_present(j, "axial_spacing_um", c.axial_spacing_um);
    get_if_present(j, "lateral_spacing_um", c.lateral_spacing_um);
}

inline void parse_model(const nlohmann::json& j, int& levels, int& base_width, std::vector<int>& dils, double& dropout,
                        const std::string& section) {
    check_keys(j, {"levels", "base_width", "dilation_rates", "dropout_rate", "dropout_at_inference"}, section);
    get_if_present(j, "levels", levels);
    get_if_present(j, "base_width", base_width);
    get_if_present(j, "dilation_rates", dils);
    get_if_present(j, "dropout_rate", dropout);
}

inline void parse_train(const nlohmann::json& j, TrainConfig& t, const std::set<std::string>& extra,
                        const std::string& section) {
    std::set<std::string> allowed = {"learning_rate",     "max_epochs",          "batch_size",
                                     "early_stop_patience", "lr_halving_patience", "validation_fraction"};
    allowed.insert(extra.begin(), extra.end());
    check_keys(j, allowed, section);
    get_if_present(j, "learning_rate", t.learning_rate);
    get_if_present(j, "max_epochs", t.max_epochs);
    get_if_present(j, "batch_size", t.batch_size);
    get_if_present(j, "early_stop_patience", t.early_stop_patience);
    get_if_present(j, "lr_halving_patience", t.lr_halving_patience);
    get_if_present(j, "validation_fraction", t.validation_fraction);
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"phantom", "dataprep", "generator", "tisn", "discriminator", "training_cgan", "training_tisn",
                        "tradseg", "evaluation", "seeds"},
                       "top level");
    ExperimentConfig cfg;
    if (j.contains("phantom")) detail::parse_phantom(j.at("phantom"), cfg.phantom);
    if (j.contains("dataprep")) {
        const auto& d = j.at("dataprep");
        detail::check_keys(d, {"tile_width", "shift_px"}, "dataprep");
        detail::get_if_present(d, "tile_width", cfg.dataprep.tile_width);
        detail::get_if_present(d, "shift_px", cfg.dataprep.shift_px);
    }
    if (j.contains("generator")) {
        detail::parse_model(j.at("generator"), cfg.generator.levels, cfg.generator.base_width,
                            cfg.generator.dilation_rates, cfg.generator.dropout_rate, "generator");
        detail::get_if_present(j.at("generator"), "dropout_at_inference", cfg.generator.dropout_at_inference);
    }
    if (j.contains("tisn"))
        detail::parse_model(j.at("tisn"), cfg.tisn.levels, cfg.tisn.base_width, cfg.tisn.dilation_rates,
                            cfg.tisn.dropout_rate, "tisn");
    if (j.contains("discriminator")) {
        const auto& d = j.at("discriminator");
        detail::check_keys(d, {"layers", "base_width"}, "discriminator");
        detail::get_if_present(d, "layers", cfg.discriminator.layers);
        detail::get_if_present(d, "base_width", cfg.discriminator.base_width);
    }
    if (j.contains("training_cgan")) {
        const auto& t = j.at("training_cgan");
        detail::parse_train(t, cfg.training_cgan.train, {"lambda", "alpha"}, "training_cgan");
        detail::get_if_present(t, "lambda", cfg.training_cgan.loss.lambda);
        detail::get_if_present(t, "alpha", cfg.training_cgan.loss.alpha);
    }
    cfg.training_cgan.train.stage = TrainStage::Cgan;
    if (j.contains("training_tisn")) {
        const auto& t = j.at("training_tisn");
        detail::parse_train(t, cfg.training_tisn.train, {"preseg_source", "augmentation_transforms"}, "training_tisn");
        if (t.contains("preseg_source")) {
            const auto s = t.at("preseg_source").get<std::string>();
            if (s == "gold")
                cfg.training_tisn.preseg_source = PresegSource::Gold;
            else if (s == "generator")
                cfg.training_tisn.preseg_source = PresegSource::Generator;
            else if (s == "image")
                cfg.training_tisn.preseg_source = PresegSource::ImageReplicated;
            else
                throw ValidationError("config: preseg_source must be gold, generator, or image");
        }
        detail::get_if_present(t, "augmentation_transforms", cfg.tisn_augmentation.transforms);
    }
    cfg.training_tisn.train.stage = TrainStage::Tisn;
    cfg.tisn_augmentation.kind = AugmentationKind::TisnFull;
    if (j.contains("tradseg")) {
        const auto& t = j.at("tradseg");
        detail::check_keys(t,
                           {"clip_low_pct", "clip_high_pct", "median_radius", "smooth_sigma", "log_gabor_wavelength_px",
                            "log_gabor_sigma_ratio", "energy_threshold_pct", "min_run", "fit_fraction",
                            "robustness_iterations"},
                           "tradseg");
        detail::get_if_present(t, "clip_low_pct", cfg.tradseg.clip_low_pct);
        detail::get_if_present(t, "clip_high_pct", cfg.tradseg.clip_high_pct);
        detail::get_if_present(t, "median_radius", cfg.tradseg.median_radius);
        detail::get_if_present(t, "smooth_sigma", cfg.tradseg.smooth_sigma);
        detail::get_if_present(t, "log_gabor_wavelength_px", cfg.tradseg.log_gabor_wavelength_px);
        detail::get_if_present(t, "log_gabor_sigma_ratio", cfg.tradseg.log_gabor_sigma_ratio);
        detail::get_if_present(t, "energy_threshold_pct", cfg.tradseg.energy_threshold_pct);
        detail::get_if_present(t, "min_run", cfg.tradseg.min_run);
        detail::get_if_present(t, "fit_fraction", cfg.tradseg.fit_fraction);
        detail::get_if_present(t, "robustness_iterations", cfg.tradseg.robustness_iterations);
    }
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        detail::check_keys(
            e, {"fit_fraction", "robustness_iterations", "axial_spacing_um", "lateral_spacing_um", "split"},
            "evaluation");
        detail::get_if_present(e, "fit_fraction", cfg.evaluation.fit_fraction);
        detail::get_if_present(e, "robustness_iterations", cfg.evaluation.robustness_iterations);
        detail::get_if_present(e, "axial_spacing_um", cfg.evaluation.axial_spacing_um);
        detail::get_if_present(e, "lateral_spacing_um", cfg.evaluation.lateral_spacing_um);
        detail::get_if_present(e, "split", cfg.evaluation.split);
        if (cfg.evaluation.split != "train" && cfg.evaluation.split != "test" && cfg.evaluation.split != "all")
            throw ValidationError("config: evaluation.split must be train, test, or all");
    }
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        detail::check_keys(s, {"corpus", "cgan", "tisn"}, "seeds");
        detail::get_if_present(s, "corpus", cfg.seeds.corpus);
        detail::get_if_present(s, "cgan", cfg.seeds.cgan);
        detail::get_if_present(s, "tisn", cfg.seeds.tisn);
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config parse error in " + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

// Draws per-phantom specs from the corpus config: interface kinds cycle
// through the three shapes, numeric parameters drawn from the config ranges.
inline std::vector<PhantomSpec> build_corpus_specs(const PhantomCorpusConfig& c, std::uint64_t seed) {
    if (c.count < 0 || c.train_count < 0 || c.train_count > c.count)
        throw ValidationError("phantom config: train_count must lie in [0, count]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<PhantomSpec> specs;
    specs.reserve(c.count);
    for (int i = 0; i < c.count; ++i) {
        PhantomSpec s;
        s.width = c.width;
        s.height = c.height;
        s.tissue_base_intensity = c.tissue_base_intensity;
        s.background_intensity = c.background_intensity;
        s.speckle_contrast = c.speckle_contrast;
        s.band_halfwidth_px = c.band_halfwidth_px;
        s.axial_spacing_um = c.axial_spacing_um;
        s.lateral_spacing_um = c.lateral_spacing_um;
        s.seed = rng();

        const double apex_row =
            (c.apex_row_frac_min + (c.apex_row_frac_max - c.apex_row_frac_min) * u01(rng)) * (c.height - 1);
        switch (i % 3) {
            case 0: {
                s.interface_kind = InterfaceKind::QuadraticArc;
                const double apex_col = (0.3 + 0.4 * u01(rng)) * (c.width - 1);
                double curv = c.curvature_min + (c.curvature_max - c.curvature_min) * u01(rng);
                const double edge = std::max(apex_col, c.width - 1 - apex_col);
                const double max_curv = (c.height - 2 - apex_row) / std::max(1.0, edge * edge);
                curv = std::min(curv, max_curv);
                s.interface_params = {apex_row, apex_col, std::max(0.0, curv)};
                break;
            }
            case 1: {
                s.interface_kind = InterfaceKind::PiecewiseFlatLimbal;
                const double break_col = (0.4 + 0.3 * u01(rng)) * (c.width - 1);
                double slope = 0.05 + 0.3 * u01(rng);
                const double max_slope = (c.height - 2 - apex_row) / std::max(1.0, c.width - 1 - break_col);
                slope = std::min(slope, max_slope);
                s.interface_params = {apex_row, break_col, std::max(0.0, slope)};
                break;
            }
            default: {
                s.interface_kind = InterfaceKind::LinearTilt;
                double slope = (u01(rng) - 0.5) * 0.4;
                const double end_row = apex_row + slope * (c.width - 1);
                if (end_row < 1.0) slope = (1.0 - apex_row) / (c.width - 1);
                if (end_row > c.height - 2.0) slope = (c.height - 2.0 - apex_row) / (c.width - 1);
                s.interface_params = {apex_row, slope};
                break;
            }
        }

        const int n_bands = c.artifact_bands_min +
                            (c.artifact_bands_max > c.artifact_bands_min
                                 ? static_cast<int>(u01(rng) * (c.artifact_bands_max - c.artifact_bands_min + 1))
                                 : 0);
        for (int b = 0; b < n_bands; ++b) {
            ArtifactBand band;
            band.center_column = u01(rng) * (c.width - 1);
            band.width = c.artifact_width_min + (c.artifact_width_max - c.artifact_width_min) * u01(rng);
            band.amplitude = c.artifact_amplitude_min + (c.artifact_amplitude_max - c.artifact_amplitude_min) * u01(rng);
            s.artifact_bands.push_back(band);
        }
        s.snr_dropoff_rate =
            c.snr_dropoff_rate_min + (c.snr_dropoff_rate_max - c.snr_dropoff_rate_min) * u01(rng);
        for (int col = 0; col < c.width; ++col)
            if (u01(rng) < c.saturation_column_probability) s.saturation_columns.push_back(col);
        specs.push_back(std::move(s));
    }
    return specs;
}

}  // namespace octseg
