#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "octseg/dataprep.hpp"
#include "octseg/losses.hpp"
#include "octseg/nn/models.hpp"

namespace octseg {

enum class TrainStage { Cgan, Tisn };

struct TrainConfig {
    TrainStage stage = TrainStage::Cgan;
    double learning_rate = 2e-3;
    int max_epochs = 100;
    int batch_size = 4;
    int early_stop_patience = 10;
    int lr_halving_patience = 5;  // used by the tisn stage only
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
};

inline TrainConfig cgan_train_defaults() { return TrainConfig{TrainStage::Cgan, 2e-3, 100, 4, 10, 0, 0.1, 0}; }
inline TrainConfig tisn_train_defaults() { return TrainConfig{TrainStage::Tisn, 1e-3, 150, 2, 10, 5, 0.1, 0}; }

inline void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("train config: learning rate must be > 0");
    if (cfg.max_epochs < 1) throw ValidationError("train config: max_epochs must be >= 1");
    if (cfg.batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (cfg.early_stop_patience < 1) throw ValidationError("train config: early_stop_patience must be >= 1");
    if (cfg.stage == TrainStage::Tisn && cfg.lr_halving_patience < 1)
        throw ValidationError("train config: lr_halving_patience must be >= 1");
    if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0))
        throw ValidationError("train config: validation_fraction must lie in (0,1)");
}

struct EpochRecord {
    int epoch = 0;
    std::map<std::string, double> train_losses;
    double validation_loss = 0.0;
    double lr = 0.0;
    double wall_time_s = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> records;
    std::string stop_reason;  // "max_epochs" or "early_stop"
    int best_epoch = 0;
    double best_validation_loss = 0.0;
};

inline void write_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open for writing: " + path);
    std::vector<std::string> terms;
    if (!log.records.empty())
        for (const auto& [k, _] : log.records.front().train_losses) terms.push_back(k);
    out << "epoch";
    for (const auto& t : terms) out << "," << t;
    out << ",validation_loss,lr,wall_time_s\n";
    out.precision(12);
    for (const auto& r : log.records) {
        out << r.epoch;
        for (const auto& t : terms) out << "," << r.train_losses.at(t);
        out << "," << r.validation_loss << "," << r.lr << "," << r.wall_time_s << "\n";
    }
}

inline void write_train_log_json(const std::string& path, const TrainLog& log) {
    nlohmann::json j;
    j["stop_reason"] = log.stop_reason;
    j["best_epoch"] = log.best_epoch;
    j["best_validation_loss"] = log.best_validation_loss;
    j["epochs"] = nlohmann::json::array();
    for (const auto& r : log.records)
        j["epochs"].push_back({{"epoch", r.epoch},
                               {"train_losses", r.train_losses},
                               {"validation_loss", r.validation_loss},
                               {"lr", r.lr},
                               {"wall_time_s", r.wall_time_s}});
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Optimizer.

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<std::vector<double>> m, v;
    long t = 0;

    explicit Adam(double lr_ = 1e-3) : lr(lr_) {}

    // Applies one update from the accumulated gradients, scaled by grad_scale
    // (1/batch for batch-mean semantics), then zeroes them.
    void step(const std::vector<nn::Param*>& params, double grad_scale) {
        if (m.empty()) {
            for (const auto* p : params) {
                m.emplace_back(p->w.size(), 0.0);
                v.emplace_back(p->w.size(), 0.0);
            }
        }
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i];
            for (std::size_t j = 0; j < p.w.size(); ++j) {
                const double g = p.g[j] * grad_scale;
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
                p.w[j] -= lr * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
            }
            p.zero_grad();
        }
    }
};

// ---------------------------------------------------------------------------
// Early stopping / LR schedule as a pure function of the validation sequence.

struct StoppingRule {
    double min_delta = 1e-6;
    int early_stop_patience = 10;
    int lr_halving_patience = 0;  // 0 disables halving

    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int since_improve = 0;
    int since_halve = 0;

    struct Decision {
        bool improved = false;
        bool stop = false;
        bool halve = false;
    };

    Decision observe(int epoch, double validation_loss) {
        Decision d;
        if (validation_loss < best - min_delta) {
            best = validation_loss;
            best_epoch = epoch;
            since_improve = 0;
            since_halve = 0;
            d.improved = true;
            return d;
        }
        ++since_improve;
        ++since_halve;
        if (since_improve >= early_stop_patience) {
            d.stop = true;
            return d;
        }
        if (lr_halving_patience > 0 && since_halve >= lr_halving_patience) {
            d.halve = true;
            since_halve = 0;
        }
        return d;
    }
};

// ---------------------------------------------------------------------------
// Datasets.

struct CGanSample {
    Image image;  // [0,1]
    Image gold;   // gold pre-segmentation, [0,1]
    WeightMask w;
};

struct TisnSample {
    Image image;   // [0,1]
    Image preseg;  // [0,1], gold or generator prediction
    ByteMask label;  // 1 = foreground (interface and below)
};

// Pairs each tile with its pre-segmentation channel, gold-standard variant.
inline std::vector<TisnSample> build_tisn_training_inputs(const std::vector<std::pair<Image, ByteMask>>& tiles,
                                                          const std::vector<Image>& gold_presegs) {
    if (tiles.size() != gold_presegs.size())
        throw ValidationError("build_tisn_training_inputs: missing pre-segmentation for a tile");
    std::vector<TisnSample> out;
    out.reserve(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        require_same_shape(tiles[i].first, gold_presegs[i], "build_tisn_training_inputs");
        out.push_back({tiles[i].first, gold_presegs[i], tiles[i].second});
    }
    return out;
}

// Generator-prediction variant: channel 2 is the trained cGAN's output.
inline std::vector<TisnSample> build_tisn_training_inputs(const std::vector<std::pair<Image, ByteMask>>& tiles,
                                                          nn::GeneratorModel& generator) {
    std::vector<TisnSample> out;
    out.reserve(tiles.size());
    for (const auto& [tile, label] : tiles)
        out.push_back({tile, forward_with_test_time_input(generator, tile, "").pixels, label});
    return out;
}

namespace detail {

inline void snapshot_params(const std::vector<nn::Param*>& params, std::vector<std::vector<double>>& store) {
    store.clear();
    for (const auto* p : params) store.push_back(p->w);
}

inline void restore_params(const std::vector<nn::Param*>& params, const std::vector<std::vector<double>>& store) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->w = store[i];
}

inline void check_finite(double loss, const char* stage, int epoch) {
    if (!std::isfinite(loss))
        throw RuntimeFailure(std::string(stage) + " training diverged: non-finite loss at epoch " +
                             std::to_string(epoch));
}

inline WeightMask mask_from_image01(const Image& img, int shift_px) {
    WeightMask w;
    w.shift_px = shift_px;
    w.pixels = ByteMask(img.rows, img.cols);
    for (std::size_t i = 0; i < img.v.size(); ++i) w.pixels.v[i] = img.v[i] >= 0.5 ? 1 : 0;
    return w;
}

inline nn::Tensor cgan_input(const CGanSample& s) {
    nn::Tensor x(2, s.image.rows, s.image.cols);
    for (int r = 0; r < s.image.rows; ++r)
        for (int c = 0; c < s.image.cols; ++c) {
            x.at(0, r, c) = 2.0 * s.image.at(r, c) - 1.0;
            x.at(1, r, c) = 2.0 * s.w.pixels.at(r, c) - 1.0;
        }
    return x;
}

inline nn::Tensor with_candidate(const nn::Tensor& x, const nn::Tensor& y) {
    return nn::concat_channels(x, y);
}

inline nn::Tensor tisn_input(const TisnSample& s) {
    nn::Tensor x(2, s.image.rows, s.image.cols);
    for (int r = 0; r < s.image.rows; ++r)
        for (int c = 0; c < s.image.cols; ++c) {
            x.at(0, r, c) = s.image.at(r, c);
            x.at(1, r, c) = s.preseg.at(r, c);
        }
    return x;
}

inline nn::Tensor one_hot_target(const ByteMask& label) {
    nn::Tensor t(2, label.rows, label.cols);
    for (int r = 0; r < label.rows; ++r)
        for (int c = 0; c < label.cols; ++c) {
            t.at(0, r, c) = label.at(r, c) ? 1.0 : 0.0;
            t.at(1, r, c) = label.at(r, c) ? 0.0 : 1.0;
        }
    return t;
}

}  // namespace detail

struct CGanTrainResult {
    nn::GeneratorModel generator;
    TrainLog log;
};

// Alternating cGAN training. Per batch: a discriminator pass over real and
// fake pairs, then a generator pass on the adversarial + weighted-L1
// objective. Gradients accumulate per sample; one optimizer step per batch.
// Validation tracks the weighted-L1 term only, computed with the deployment
// input convention (image in both channels) so epoch selection reflects
// inference-time behaviour. Returns the generator at its best validation
// epoch.
inline CGanTrainResult train_cgan(const std::vector<CGanSample>& dataset, const TrainConfig& cfg,
                                  const nn::GeneratorConfig& gen_cfg, const nn::DiscriminatorConfig& disc_cfg,
                                  const CGanLossConfig& loss_cfg = {}) {
    validate(cfg);
    validate(loss_cfg);
    if (dataset.empty()) throw ValidationError("train_cgan: empty dataset");

    auto [train_idx, val_idx] =
        split_train_validation(static_cast<int>(dataset.size()), cfg.validation_fraction, cfg.seed);

    // flip-only augmentation: static dataset doubling
    AugmentationPolicy flip_policy;
    flip_policy.kind = AugmentationKind::CganFlipOnly;
    std::mt19937_64 aug_rng(cfg.seed ^ 0xa5a5a5a5ull);
    std::vector<CGanSample> train_set;
    for (int i : train_idx) {
        const auto& s = dataset[i];
        AlignedSample aligned{s.image, {s.gold, Image(s.w.pixels.rows, s.w.pixels.cols)}, {false, true}};
        for (std::size_t k = 0; k < aligned.targets[1].v.size(); ++k)
            aligned.targets[1].v[k] = s.w.pixels.v[k] ? 1.0 : 0.0;
        for (auto& v : augment(aligned, flip_policy, aug_rng))
            train_set.push_back({v.image, v.targets[0], detail::mask_from_image01(v.targets[1], s.w.shift_px)});
    }

    nn::GeneratorModel gen(gen_cfg);
    nn::PatchDiscriminator disc(disc_cfg);
    auto gen_params = gen.params();
    auto disc_params = disc.params();
    Adam opt_g(cfg.learning_rate), opt_d(cfg.learning_rate);
    for (auto* p : gen_params) p->zero_grad();
    for (auto* p : disc_params) p->zero_grad();

    StoppingRule rule;
    rule.early_stop_patience = cfg.early_stop_patience;
    rule.lr_halving_patience = 0;
    std::vector<std::vector<double>> best_params;
    detail::snapshot_params(gen_params, best_params);

    TrainLog log;
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5eedull);
    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_d = 0.0, sum_adv = 0.0, sum_wl1 = 0.0;
        long n_seen = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t b_end = std::min(order.size(), b + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(b_end - b);

            // discriminator pass
            for (auto* p : disc_params) p->zero_grad();
            for (std::size_t s = b; s < b_end; ++s) {
                const auto& sample = train_set[order[s]];
                const nn::Tensor x = detail::cgan_input(sample);
                nn::Tensor y_t(1, sample.gold.rows, sample.gold.cols);
                for (std::size_t k = 0; k < y_t.v.size(); ++k) y_t.v[k] = 2.0 * sample.gold.v[k] - 1.0;
                const nn::Tensor y_f = gen.forward(x, true);
                const nn::Tensor d_real = disc.forward(detail::with_candidate(x, y_t));
                disc.backward(adversarial_grad_real(d_real));
                const nn::Tensor d_fake = disc.forward(detail::with_candidate(x, y_f));
                disc.backward(adversarial_grad_fake_for_d(d_fake));
                sum_d += adversarial_loss(d_real, d_fake).loss_d;
            }
            opt_d.step(disc_params, inv);

            // generator pass
            for (auto* p : gen_params) p->zero_grad();
            for (std::size_t s = b; s < b_end; ++s) {
                const auto& sample = train_set[order[s]];
                const nn::Tensor x = detail::cgan_input(sample);
                nn::Tensor y_t(1, sample.gold.rows, sample.gold.cols);
                for (std::size_t k = 0; k < y_t.v.size(); ++k) y_t.v[k] = 2.0 * sample.gold.v[k] - 1.0;
                const nn::Tensor y_f = gen.forward(x, true);
                const nn::Tensor d_fake = disc.forward(detail::with_candidate(x, y_f));
                const nn::Tensor d_in_grad = disc.backward(adversarial_grad_fake_for_g(d_fake));
                const Image y_f_img = nn::tensor_plane_to_image(y_f, 0);
                const Image y_t_img = nn::tensor_plane_to_image(y_t, 0);
                const Image wl1_g = weighted_l1_grad(y_t_img, y_f_img, sample.w, loss_cfg.alpha);
                nn::Tensor dy(1, y_f.h, y_f.w);
                for (int r = 0; r < dy.h; ++r)
                    for (int c = 0; c < dy.w; ++c)
                        dy.at(0, r, c) = loss_cfg.lambda * wl1_g.at(r, c) + d_in_grad.at(x.ch, r, c);
                gen.backward(dy);
                const double wl1 = weighted_l1_loss(y_t_img, y_f_img, sample.w, loss_cfg.alpha);
                sum_adv += adversarial_loss(d_fake, d_fake).loss_g_adv;
                sum_wl1 += wl1;
                ++n_seen;
            }
            opt_g.step(gen_params, inv);
        }

        // Validation mirrors deployment: the mask channel is unavailable at
        // inference, so the image fills both input channels here too.
        double val_loss = 0.0;
        for (int i : val_idx) {
            const auto& sample = dataset[i];
            nn::Tensor x(2, sample.image.rows, sample.image.cols);
            for (int r = 0; r < x.h; ++r)
                for (int c = 0; c < x.w; ++c) {
                    const double v = 2.0 * sample.image.at(r, c) - 1.0;
                    x.at(0, r, c) = v;
                    x.at(1, r, c) = v;
                }
            const nn::Tensor y = gen.forward(x, false);
            Image y_t_img(sample.gold.rows, sample.gold.cols);
            for (std::size_t k = 0; k < y_t_img.v.size(); ++k) y_t_img.v[k] = 2.0 * sample.gold.v[k] - 1.0;
            val_loss += weighted_l1_loss(y_t_img, nn::tensor_plane_to_image(y, 0), sample.w, loss_cfg.alpha);
        }
        val_loss /= static_cast<double>(val_idx.size());

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_losses["loss_d"] = sum_d / static_cast<double>(n_seen);
        rec.train_losses["loss_g_adv"] = sum_adv / static_cast<double>(n_seen);
        rec.train_losses["weighted_l1"] = sum_wl1 / static_cast<double>(n_seen);
        rec.train_losses["objective"] =
            rec.train_losses["loss_g_adv"] + loss_cfg.lambda * rec.train_losses["weighted_l1"];
        rec.validation_loss = val_loss;
        rec.lr = opt_g.lr;
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.records.push_back(rec);
        detail::check_finite(rec.train_losses["objective"], "cgan", epoch);
        detail::check_finite(val_loss, "cgan", epoch);

        const auto decision = rule.observe(epoch, val_loss);
        if (decision.improved) detail::snapshot_params(gen_params, best_params);
        if (decision.stop) {
            log.stop_reason = "early_stop";
            break;
        }
    }
    if (log.stop_reason.empty()) log.stop_reason = "max_epochs";
    log.best_epoch = rule.best_epoch;
    log.best_validation_loss = rule.best;
    detail::restore_params(gen_params, best_params);
    return {std::move(gen), std::move(log)};
}

struct TisnTrainResult {
    nn::TisnModel model;
    TrainLog log;
};

// TISN training on the MSE objective: full augmentation drawn per epoch, LR
// halved after lr_halving_patience stagnant epochs, early stop after
// early_stop_patience. Returns the best-validation model.
inline TisnTrainResult train_tisn(const std::vector<TisnSample>& dataset, const TrainConfig& cfg,
                                  const nn::TisnConfig& net_cfg, const AugmentationPolicy& policy_in = {}) {
    validate(cfg);
    if (dataset.empty()) throw ValidationError("train_tisn: empty dataset");
    AugmentationPolicy policy = policy_in;
    policy.kind = AugmentationKind::TisnFull;
    validate(policy);

    auto [train_idx, val_idx] =
        split_train_validation(static_cast<int>(dataset.size()), cfg.validation_fraction, cfg.seed);

    nn::TisnModel model(net_cfg);
    auto params = model.params();
    Adam opt(cfg.learning_rate);
    for (auto* p : params) p->zero_grad();

    StoppingRule rule;
    rule.early_stop_patience = cfg.early_stop_patience;
    rule.lr_halving_patience = cfg.lr_halving_patience;
    std::vector<std::vector<double>> best_params;
    detail::snapshot_params(params, best_params);

    TrainLog log;
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5eedull);
    std::mt19937_64 aug_rng(cfg.seed ^ 0xa5a5a5a5ull);
    std::vector<int> order = train_idx;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_mse = 0.0;
        long n_seen = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t b_end = std::min(order.size(), b + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(b_end - b);
            for (auto* p : params) p->zero_grad();
            for (std::size_t s = b; s < b_end; ++s) {
                const auto& base = dataset[order[s]];
                AlignedSample aligned{base.image, {base.preseg, Image(base.label.rows, base.label.cols)}, {false, true}};
                for (std::size_t k = 0; k < aligned.targets[1].v.size(); ++k)
                    aligned.targets[1].v[k] = base.label.v[k] ? 1.0 : 0.0;
                const AlignedSample var = augment(aligned, policy, aug_rng).front();
                TisnSample sample;
                sample.image = var.image;
                sample.preseg = var.targets[0];
                sample.label = ByteMask(base.label.rows, base.label.cols);
                for (std::size_t k = 0; k < sample.label.v.size(); ++k)
                    sample.label.v[k] = var.targets[1].v[k] >= 0.5 ? 1 : 0;

                const nn::Tensor x = detail::tisn_input(sample);
                const nn::Tensor target = detail::one_hot_target(sample.label);
                const nn::Tensor pred = model.forward(x, true);
                model.backward(mse_grad(pred, target));
                sum_mse += mse_loss(pred, target);
                ++n_seen;
            }
            opt.step(params, inv);
        }

        double val_loss = 0.0;
        for (int i : val_idx) {
            const auto& sample = dataset[i];
            const nn::Tensor pred = model.forward(detail::tisn_input(sample), false);
            val_loss += mse_loss(pred, detail::one_hot_target(sample.label));
        }
        val_loss /= static_cast<double>(val_idx.size());

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_losses["mse"] = sum_mse / static_cast<double>(n_seen);
        rec.validation_loss = val_loss;
        rec.lr = opt.lr;
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.records.push_back(rec);
        detail::check_finite(rec.train_losses["mse"], "tisn", epoch);
        detail::check_finite(val_loss, "tisn", epoch);

        const auto decision = rule.observe(epoch, val_loss);
        if (decision.improved) detail::snapshot_params(params, best_params);
        if (decision.stop) {
            log.stop_reason = "early_stop";
            break;
        }
        if (decision.halve) opt.lr *= 0.5;
    }
    if (log.stop_reason.empty()) log.stop_reason = "max_epochs";
    log.best_epoch = rule.best_epoch;
    log.best_validation_loss = rule.best;
    detail::restore_params(params, best_params);
    return {std::move(model), std::move(log)};
}

}  // namespace octseg
