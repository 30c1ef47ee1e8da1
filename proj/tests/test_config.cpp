#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "octseg/config.hpp"

using namespace octseg;
using nlohmann::json;

namespace {

std::string temp_file(const std::string& stem, const std::string& content) {
    const std::string path = std::string(std::getenv("TMPDIR") ? std::getenv("TMPDIR") : "/tmp") + "/" + stem;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("experiment config defaults are the pinned training recipe") {
    const ExperimentConfig cfg = parse_experiment_config(json::object());
    CHECK(cfg.phantom.width == 64);
    CHECK(cfg.phantom.height == 128);
    CHECK(cfg.phantom.count == 30);
    CHECK(cfg.phantom.train_count == 14);
    CHECK(cfg.dataprep.shift_px == 50);

    CHECK(cfg.training_cgan.train.stage == TrainStage::Cgan);
    CHECK(cfg.training_cgan.train.learning_rate == 2e-3);
    CHECK(cfg.training_cgan.train.max_epochs == 100);
    CHECK(cfg.training_cgan.train.batch_size == 4);
    CHECK(cfg.training_cgan.train.early_stop_patience == 10);
    CHECK(cfg.training_cgan.loss.lambda == 100.0);
    CHECK(cfg.training_cgan.loss.alpha == 10.0);

    CHECK(cfg.training_tisn.train.stage == TrainStage::Tisn);
    CHECK(cfg.training_tisn.train.learning_rate == 1e-3);
    CHECK(cfg.training_tisn.train.max_epochs == 150);
    CHECK(cfg.training_tisn.train.batch_size == 2);
    CHECK(cfg.training_tisn.train.lr_halving_patience == 5);
    CHECK(cfg.training_tisn.preseg_source == PresegSource::Gold);
    CHECK(cfg.tisn_augmentation.kind == AugmentationKind::TisnFull);

    CHECK(cfg.evaluation.split == "test");
    CHECK(cfg.seeds.corpus == 1);
    CHECK(cfg.seeds.cgan == 2);
    CHECK(cfg.seeds.tisn == 3);
}

TEST_CASE("experiment config parses every section") {
    const json j = {
        {"phantom",
         {{"width", 48},
          {"height", 96},
          {"count", 12},
          {"train_count", 6},
          {"speckle_contrast", 0.4},
          {"apex_row_frac", {0.25, 0.45}},
          {"curvature", {0.004, 0.01}},
          {"artifact_bands_min", 1},
          {"artifact_bands_max", 2},
          {"artifact_amplitude", {0.7, 0.95}},
          {"saturation_column_probability", 0.05},
          {"axial_spacing_um", 2.0},
          {"lateral_spacing_um", 4.0}}},
        {"dataprep", {{"tile_width", 48}, {"shift_px", 30}}},
        {"generator", {{"levels", 2}, {"base_width", 8}, {"dilation_rates", {1, 2}}, {"dropout_rate", 0.25}}},
        {"tisn", {{"levels", 1}, {"base_width", 4}}},
        {"discriminator", {{"layers", 2}, {"base_width", 8}}},
        {"training_cgan", {{"learning_rate", 1e-3}, {"max_epochs", 20}, {"lambda", 50.0}, {"alpha", 5.0}}},
        {"training_tisn",
         {{"max_epochs", 30}, {"preseg_source", "generator"}, {"augmentation_transforms", {"hflip", "gamma"}}}},
        {"tradseg", {{"log_gabor_wavelength_px", 6.0}, {"energy_threshold_pct", 90.0}}},
        {"evaluation", {{"split", "all"}, {"axial_spacing_um", 2.0}}},
        {"seeds", {{"corpus", 7}, {"cgan", 8}, {"tisn", 9}}},
    };
    const ExperimentConfig cfg = parse_experiment_config(j);
    CHECK(cfg.phantom.width == 48);
    CHECK(cfg.phantom.count == 12);
    CHECK(cfg.phantom.apex_row_frac_min == 0.25);
    CHECK(cfg.phantom.apex_row_frac_max == 0.45);
    CHECK(cfg.phantom.artifact_bands_max == 2);
    CHECK(cfg.phantom.artifact_amplitude_min == 0.7);
    CHECK(cfg.dataprep.tile_width == 48);
    CHECK(cfg.dataprep.shift_px == 30);
    CHECK(cfg.generator.levels == 2);
    CHECK(cfg.generator.dilation_rates == std::vector<int>{1, 2});
    CHECK(cfg.tisn.levels == 1);
    CHECK(cfg.discriminator.layers == 2);
    CHECK(cfg.training_cgan.train.learning_rate == 1e-3);
    CHECK(cfg.training_cgan.train.max_epochs == 20);
    CHECK(cfg.training_cgan.loss.lambda == 50.0);
    CHECK(cfg.training_cgan.loss.alpha == 5.0);
    CHECK(cfg.training_tisn.train.max_epochs == 30);
    CHECK(cfg.training_tisn.preseg_source == PresegSource::Generator);
    CHECK(cfg.tisn_augmentation.transforms == std::vector<std::string>{"hflip", "gamma"});
    CHECK(cfg.tradseg.log_gabor_wavelength_px == 6.0);
    CHECK(cfg.tradseg.energy_threshold_pct == 90.0);
    CHECK(cfg.evaluation.split == "all");
    CHECK(cfg.evaluation.axial_spacing_um == 2.0);
    CHECK(cfg.seeds.corpus == 7);
}

TEST_CASE("experiment config rejects unknown keys at every level") {
    CHECK_THROWS_AS(parse_experiment_config({{"phanton", json::object()}}), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config({{"phantom", {{"widht", 32}}}}), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config({{"training_cgan", {{"lamda", 10}}}}), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config({{"seeds", {{"corpse", 1}}}}), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config({{"tisn", {{"lambda", 1}}}}), ValidationError);
}

TEST_CASE("experiment config validates enumerations and ranges") {
    CHECK_THROWS_AS(parse_experiment_config({{"training_tisn", {{"preseg_source", "golden"}}}}), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config({{"evaluation", {{"split", "val"}}}}), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config({{"phantom", {{"apex_row_frac", {0.5}}}}}), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config({{"phantom", {{"apex_row_frac", {0.6, 0.2}}}}}), ValidationError);
    CHECK(parse_experiment_config({{"training_tisn", {{"preseg_source", "image"}}}}).training_tisn.preseg_source ==
          PresegSource::ImageReplicated);
}

TEST_CASE("experiment config loads from disk and reports parse failures") {
    const std::string good = temp_file("octseg_cfg_good.json", R"({"phantom": {"width": 32, "height": 64}})");
    const ExperimentConfig cfg = load_experiment_config(good);
    CHECK(cfg.phantom.width == 32);
    std::remove(good.c_str());

    const std::string bad = temp_file("octseg_cfg_bad.json", "{\"phantom\": ");
    CHECK_THROWS_AS(load_experiment_config(bad), ValidationError);
    std::remove(bad.c_str());

    CHECK_THROWS_AS(load_experiment_config("/nonexistent/config.json"), ValidationError);
}

TEST_CASE("corpus specs are deterministic in the seed and cycle interface shapes") {
    PhantomCorpusConfig c;
    c.count = 9;
    c.train_count = 4;
    c.artifact_bands_min = 1;
    c.artifact_bands_max = 2;
    c.saturation_column_probability = 0.03;
    c.snr_dropoff_rate_min = 0.01;
    c.snr_dropoff_rate_max = 0.05;

    const auto a = build_corpus_specs(c, 42);
    const auto b = build_corpus_specs(c, 42);
    const auto other = build_corpus_specs(c, 43);
    REQUIRE(a.size() == 9);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].interface_params == b[i].interface_params);
        if (a[i].seed != other[i].seed) any_diff = true;
    }
    CHECK(any_diff);

    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].interface_kind == (i % 3 == 0   ? InterfaceKind::QuadraticArc
                                      : i % 3 == 1 ? InterfaceKind::PiecewiseFlatLimbal
                                                   : InterfaceKind::LinearTilt));
        CHECK(static_cast<int>(a[i].artifact_bands.size()) >= 1);
        CHECK_NOTHROW(validate(a[i]));
    }
}

TEST_CASE("corpus specs check the split arithmetic") {
    PhantomCorpusConfig c;
    c.count = 4;
    c.train_count = 6;
    CHECK_THROWS_AS(build_corpus_specs(c, 1), ValidationError);
    c.train_count = -1;
    CHECK_THROWS_AS(build_corpus_specs(c, 1), ValidationError);
}
