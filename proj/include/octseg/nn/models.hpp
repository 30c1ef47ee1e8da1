#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "octseg/nn/layers.hpp"
#include "octseg/types.hpp"

namespace octseg::nn {

// Building block: parallel dilated 3x3 paths, concatenated with the block
// input (dense skip), reduced by a 1x1 bottleneck, plus a residual connection
// around the whole block.
struct DilatedBlock {
    int in_ch = 0, out_ch = 0;
    std::vector<int> dilations;
    std::vector<Conv2d> paths;
    std::vector<ReLU> path_acts;
    Conv2d bottleneck;
    bool has_proj = false;
    Conv2d proj;
    ReLU out_act;
    Tensor x_cache;

    DilatedBlock() = default;
    DilatedBlock(int in, int out, const std::vector<int>& dils) : in_ch(in), out_ch(out), dilations(dils) {
        if (dils.empty()) throw ValidationError("DilatedBlock: need at least one dilation rate");
        for (int d : dils) {
            paths.emplace_back(in, out, 3, 1, d);
            path_acts.emplace_back();
        }
        bottleneck = Conv2d(static_cast<int>(dils.size()) * out + in, out, 1, 1, 1, 0);
        has_proj = in != out;
        if (has_proj) proj = Conv2d(in, out, 1, 1, 1, 0);
    }

    // The bottleneck starts at zero so every block is initially its residual;
    // otherwise activation variance doubles per block and the tanh head
    // saturates before training begins.
    void init(std::mt19937_64& rng) {
        for (auto& p : paths) p.init(rng);
        bottleneck.init(rng);
        std::fill(bottleneck.weight.w.begin(), bottleneck.weight.w.end(), 0.0);
        std::fill(bottleneck.weight.g.begin(), bottleneck.weight.g.end(), 0.0);
        if (has_proj) proj.init(rng);
    }

    Tensor forward(const Tensor& x) {
        x_cache = x;
        Tensor cat;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            Tensor p = path_acts[i].forward(paths[i].forward(x));
            cat = i == 0 ? std::move(p) : concat_channels(cat, p);
        }
        cat = concat_channels(cat, x);
        Tensor y = bottleneck.forward(cat);
        const Tensor res = has_proj ? proj.forward(x) : x;
        for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += res.v[i];
        return out_act.forward(y);
    }

    Tensor backward(const Tensor& dy) {
        Tensor d = out_act.backward(dy);
        Tensor dx = has_proj ? proj.backward(d) : d;
        Tensor dcat = bottleneck.backward(d);
        const std::size_t plane = static_cast<std::size_t>(out_ch) * dcat.h * dcat.w;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            Tensor dp(out_ch, dcat.h, dcat.w);
            std::copy(dcat.v.begin() + static_cast<std::ptrdiff_t>(i * plane),
                      dcat.v.begin() + static_cast<std::ptrdiff_t>((i + 1) * plane), dp.v.begin());
            Tensor dxi = paths[i].backward(path_acts[i].backward(dp));
            for (std::size_t j = 0; j < dx.v.size(); ++j) dx.v[j] += dxi.v[j];
        }
        const std::size_t tail = paths.size() * plane;
        for (std::size_t j = 0; j < dx.v.size(); ++j) dx.v[j] += dcat.v[tail + j];
        return dx;
    }

    void collect(std::vector<Param*>& out) {
        for (auto& p : paths) {
            out.push_back(&p.weight);
            out.push_back(&p.bias);
        }
        out.push_back(&bottleneck.weight);
        out.push_back(&bottleneck.bias);
        if (has_proj) {
            out.push_back(&proj.weight);
            out.push_back(&proj.bias);
        }
    }
};

// Encoder-decoder backbone: max-pool contraction, nearest-neighbour + 3x3
// conv expansion, concatenative skips across levels, dropout after the bottom
// and each decoder block (the generator's noise source).
struct Backbone {
    int in_channels = 2, out_channels = 1, levels = 3, base_width = 16;
    std::vector<int> dilation_rates{1, 2, 4};
    double dropout_rate = 0.5;

    std::vector<DilatedBlock> enc;
    std::vector<MaxPool2> pools;
    DilatedBlock bottom;
    Dropout drop_bottom;
    std::vector<NearestUp2> ups;
    std::vector<Conv2d> up_convs;
    std::vector<DilatedBlock> dec;
    std::vector<Dropout> drops;
    Conv2d head;

    std::vector<Tensor> skip_cache;
    std::vector<Tensor> d_skip;

    Backbone() = default;
    Backbone(int in_ch, int out_ch, int levels_, int base_width_, std::vector<int> dils, double dropout)
        : in_channels(in_ch),
          out_channels(out_ch),
          levels(levels_),
          base_width(base_width_),
          dilation_rates(std::move(dils)),
          dropout_rate(dropout) {
        if (levels < 1) throw ValidationError("backbone: levels must be >= 1");
        if (base_width < 1) throw ValidationError("backbone: base_width must be >= 1");
        for (int i = 0; i < levels; ++i) {
            const int in = i == 0 ? in_channels : base_width << (i - 1);
            enc.emplace_back(in, base_width << i, dilation_rates);
            pools.emplace_back();
        }
        bottom = DilatedBlock(base_width << (levels - 1), base_width << levels, dilation_rates);
        drop_bottom.rate = dropout_rate;
        for (int i = levels - 1; i >= 0; --i) {
            ups.emplace_back();
            up_convs.emplace_back(base_width << (i + 1), base_width << i, 3);
            dec.emplace_back(2 * (base_width << i), base_width << i, dilation_rates);
            drops.emplace_back();
            drops.back().rate = dropout_rate;
        }
        head = Conv2d(base_width, out_channels, 1, 1, 1, 0);
    }

    void init(std::mt19937_64& rng) {
        for (auto& b : enc) b.init(rng);
        bottom.init(rng);
        for (auto& c : up_convs) c.init(rng);
        for (auto& b : dec) b.init(rng);
        head.init(rng);
    }

    void check_divisible(const Tensor& x) const {
        const int m = 1 << levels;
        if (x.h % m != 0 || x.w % m != 0)
            throw ValidationError("backbone: spatial dims must be divisible by 2^levels");
    }

    // Returns head logits; activation is the caller's.
    Tensor forward(const Tensor& x, bool dropout_active, std::mt19937_64& rng) {
        if (x.ch != in_channels) throw ValidationError("backbone: input channel mismatch");
        check_divisible(x);
        skip_cache.assign(levels, Tensor());
        Tensor t = x;
        for (int i = 0; i < levels; ++i) {
            skip_cache[i] = enc[i].forward(t);
            t = pools[i].forward(skip_cache[i]);
        }
        t = drop_bottom.forward(bottom.forward(t), dropout_active, rng);
        for (int j = 0; j < levels; ++j) {
            const int level = levels - 1 - j;
            t = up_convs[j].forward(ups[j].forward(t));
            t = dec[j].forward(concat_channels(t, skip_cache[level]));
            t = drops[j].forward(t, dropout_active, rng);
        }
        return head.forward(t);
    }

    Tensor backward(const Tensor& dlogits) {
        Tensor d = head.backward(dlogits);
        d_skip.assign(levels, Tensor());
        for (int j = levels - 1; j >= 0; --j) {
            const int level = levels - 1 - j;
            Tensor dcat = dec[j].backward(drops[j].backward(d));
            Tensor dup;
            split_channels(dcat, dup, d_skip[level], base_width << level);
            d = ups[j].backward(up_convs[j].backward(dup));
        }
        d = bottom.backward(drop_bottom.backward(d));
        for (int i = levels - 1; i >= 0; --i) {
            Tensor de = pools[i].backward(d);
            for (std::size_t k = 0; k < de.v.size(); ++k) de.v[k] += d_skip[i].v[k];
            d = enc[i].backward(de);
        }
        return d;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& b : enc) b.collect(out);
        bottom.collect(out);
        for (auto& c : up_convs) {
            out.push_back(&c.weight);
            out.push_back(&c.bias);
        }
        for (auto& b : dec) b.collect(out);
        out.push_back(&head.weight);
        out.push_back(&head.bias);
        return out;
    }
};

struct GeneratorConfig {
    int in_channels = 2;
    int out_channels = 1;
    int levels = 3;
    int base_width = 16;
    std::vector<int> dilation_rates{1, 2, 4};
    double dropout_rate = 0.5;
    bool dropout_at_inference = false;
    std::uint64_t seed = 0;
};

struct TisnConfig {
    int in_channels = 2;
    int out_channels = 2;
    int levels = 3;
    int base_width = 16;
    std::vector<int> dilation_rates{1, 2, 4};
    double dropout_rate = 0.5;
    std::uint64_t seed = 0;
};

struct DiscriminatorConfig {
    int in_channels = 3;
    int layers = 3;  // stride-2 convolutions; 3 gives the 70x70 receptive field
    int base_width = 16;
    std::uint64_t seed = 0;
};

// Maps (2,H,W) in [-1,1] to (1,H,W) in [-1,1].
struct GeneratorModel {
    GeneratorConfig cfg;
    Backbone net;
    Tanh act;
    std::mt19937_64 dropout_rng;

    explicit GeneratorModel(const GeneratorConfig& c = {})
        : cfg(c),
          net(c.in_channels, c.out_channels, c.levels, c.base_width, c.dilation_rates, c.dropout_rate),
          dropout_rng(c.seed ^ 0x9e3779b97f4a7c15ull) {
        std::mt19937_64 rng(c.seed);
        net.init(rng);
    }

    Tensor forward(const Tensor& x, bool training) {
        return act.forward(net.forward(x, training || cfg.dropout_at_inference, dropout_rng));
    }
    Tensor backward(const Tensor& dy) { return net.backward(act.backward(dy)); }
    std::vector<Param*> params() { return net.params(); }
};

// Maps (2,H,W) in [0,1] to per-pixel class probabilities (2,H,W);
// channel 0 = foreground, channel 1 = background.
struct TisnModel {
    TisnConfig cfg;
    Backbone net;
    SoftmaxChannels act;
    std::mt19937_64 dropout_rng;

    explicit TisnModel(const TisnConfig& c = {})
        : cfg(c),
          net(c.in_channels, c.out_channels, c.levels, c.base_width, c.dilation_rates, c.dropout_rate),
          dropout_rng(c.seed ^ 0x9e3779b97f4a7c15ull) {
        std::mt19937_64 rng(c.seed);
        net.init(rng);
    }

    Tensor forward(const Tensor& x, bool training) { return act.forward(net.forward(x, training, dropout_rng)); }
    Tensor backward(const Tensor& dy) { return net.backward(act.backward(dy)); }
    std::vector<Param*> params() { return net.params(); }
};

// PatchGAN: stride-2 k4 convolutions with LeakyReLU, two stride-1 k4 layers,
// sigmoid patch scores.
struct PatchDiscriminator {
    DiscriminatorConfig cfg;
    std::vector<Conv2d> convs;
    std::vector<LeakyReLU> acts;
    Sigmoid sig;

    explicit PatchDiscriminator(const DiscriminatorConfig& c = {}) : cfg(c) {
        if (cfg.layers < 1) throw ValidationError("discriminator: layers must be >= 1");
        int in = cfg.in_channels;
        int width = cfg.base_width;
        for (int i = 0; i < cfg.layers; ++i) {
            convs.emplace_back(in, width, 4, 2, 1, 1);
            acts.emplace_back();
            in = width;
            width *= 2;
        }
        convs.emplace_back(in, width, 4, 1, 1, 1);
        acts.emplace_back();
        convs.emplace_back(width, 1, 4, 1, 1, 1);
        std::mt19937_64 rng(cfg.seed);
        for (auto& conv : convs) conv.init(rng);
    }

    Tensor forward(const Tensor& x) {
        Tensor t = x;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            t = convs[i].forward(t);
            if (i + 1 < convs.size()) t = acts[i].forward(t);
        }
        return sig.forward(t);
    }

    Tensor backward(const Tensor& dy) {
        Tensor d = sig.backward(dy);
        for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
            d = convs[i].backward(d);
            if (i > 0) d = acts[i - 1].backward(d);
        }
        return d;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& c : convs) {
            out.push_back(&c.weight);
            out.push_back(&c.bias);
        }
        return out;
    }
};

template <class Model>
std::size_t count_parameters(Model& m) {
    std::size_t n = 0;
    for (const Param* p : m.params()) n += p->w.size();
    return n;
}

inline Tensor normalize_to_pm1(const Tensor& x01) {
    Tensor y = x01;
    for (auto& v : y.v) v = 2.0 * v - 1.0;
    return y;
}

// Test-time generator inference: the mask channel is unavailable, so the tile
// fills both input channels; output rescaled from [-1,1] back to [0,1].
inline PreSegImage forward_with_test_time_input(GeneratorModel& model, const Image& tile, const std::string& source_id) {
    Tensor x(2, tile.rows, tile.cols);
    for (int r = 0; r < tile.rows; ++r)
        for (int c = 0; c < tile.cols; ++c) {
            const double v = 2.0 * tile.at(r, c) - 1.0;
            x.at(0, r, c) = v;
            x.at(1, r, c) = v;
        }
    const Tensor y = model.forward(x, false);
    PreSegImage out;
    out.source_id = source_id;
    out.pixels = Image(tile.rows, tile.cols);
    for (int r = 0; r < tile.rows; ++r)
        for (int c = 0; c < tile.cols; ++c) out.pixels.at(r, c) = clamp01(0.5 * (y.at(0, r, c) + 1.0));
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: flat doubles with a magic header, plus a JSON sidecar holding
// the full config and seed.

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"levels", c.levels},
         {"base_width", c.base_width},   {"dilation_rates", c.dilation_rates}, {"dropout_rate", c.dropout_rate},
         {"dropout_at_inference", c.dropout_at_inference}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    j.at("in_channels").get_to(c.in_channels);
    j.at("out_channels").get_to(c.out_channels);
    j.at("levels").get_to(c.levels);
    j.at("base_width").get_to(c.base_width);
    j.at("dilation_rates").get_to(c.dilation_rates);
    j.at("dropout_rate").get_to(c.dropout_rate);
    j.at("dropout_at_inference").get_to(c.dropout_at_inference);
    j.at("seed").get_to(c.seed);
}
inline void to_json(nlohmann::json& j, const TisnConfig& c) {
    j = {{"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"levels", c.levels},
         {"base_width", c.base_width},   {"dilation_rates", c.dilation_rates}, {"dropout_rate", c.dropout_rate},
         {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, TisnConfig& c) {
    j.at("in_channels").get_to(c.in_channels);
    j.at("out_channels").get_to(c.out_channels);
    j.at("levels").get_to(c.levels);
    j.at("base_width").get_to(c.base_width);
    j.at("dilation_rates").get_to(c.dilation_rates);
    j.at("dropout_rate").get_to(c.dropout_rate);
    j.at("seed").get_to(c.seed);
}
inline void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"in_channels", c.in_channels}, {"layers", c.layers}, {"base_width", c.base_width}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    j.at("in_channels").get_to(c.in_channels);
    j.at("layers").get_to(c.layers);
    j.at("base_width").get_to(c.base_width);
    j.at("seed").get_to(c.seed);
}

namespace detail {

constexpr char kCheckpointMagic[8] = {'O', 'C', 'S', 'E', 'G', 'N', 'E', 'T'};

inline void write_weights(const std::string& path, std::vector<Param*> params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    std::uint64_t total = 0;
    for (const Param* p : params) total += p->w.size();
    out.write(reinterpret_cast<const char*>(&total), sizeof total);
    for (const Param* p : params)
        out.write(reinterpret_cast<const char*>(p->w.data()), static_cast<std::streamsize>(p->w.size() * sizeof(double)));
    if (!out) throw RuntimeFailure("checkpoint write failed: " + path);
}

inline void read_weights(const std::string& path, std::vector<Param*> params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kCheckpointMagic))
        throw RuntimeFailure("not a checkpoint file: " + path);
    std::uint64_t total = 0;
    in.read(reinterpret_cast<char*>(&total), sizeof total);
    std::uint64_t expected = 0;
    for (const Param* p : params) expected += p->w.size();
    if (total != expected)
        throw RuntimeFailure("checkpoint parameter count mismatch: " + path + " holds " + std::to_string(total) +
                             ", model needs " + std::to_string(expected));
    for (Param* p : params) in.read(reinterpret_cast<char*>(p->w.data()), static_cast<std::streamsize>(p->w.size() * sizeof(double)));
    if (!in) throw RuntimeFailure("checkpoint truncated: " + path);
}

template <class Config>
void write_sidecar(const std::string& path, const char* kind, const Config& cfg, std::uint64_t training_seed) {
    nlohmann::json j;
    j["kind"] = kind;
    j["config"] = cfg;
    j["training_seed"] = training_seed;
    std::ofstream out(path + ".json");
    if (!out) throw RuntimeFailure("cannot open sidecar for writing: " + path + ".json");
    out << j.dump(2) << "\n";
}

template <class Config>
Config read_sidecar(const std::string& path, const char* kind, std::uint64_t* training_seed = nullptr) {
    std::ifstream in(path + ".json");
    if (!in) throw RuntimeFailure("cannot open sidecar: " + path + ".json");
    nlohmann::json j;
    in >> j;
    if (j.at("kind").get<std::string>() != kind)
        throw RuntimeFailure("checkpoint kind mismatch: " + path + " is a " + j.at("kind").get<std::string>());
    if (training_seed) *training_seed = j.value("training_seed", std::uint64_t{0});
    return j.at("config").get<Config>();
}

}  // namespace detail

inline void save_checkpoint(GeneratorModel& m, const std::string& path, std::uint64_t training_seed = 0) {
    detail::write_weights(path, m.params());
    detail::write_sidecar(path, "generator", m.cfg, training_seed);
}
inline void save_checkpoint(TisnModel& m, const std::string& path, std::uint64_t training_seed = 0) {
    detail::write_weights(path, m.params());
    detail::write_sidecar(path, "tisn", m.cfg, training_seed);
}
inline void save_checkpoint(PatchDiscriminator& m, const std::string& path, std::uint64_t training_seed = 0) {
    detail::write_weights(path, m.params());
    detail::write_sidecar(path, "discriminator", m.cfg, training_seed);
}

inline GeneratorModel load_generator(const std::string& path) {
    GeneratorModel m(detail::read_sidecar<GeneratorConfig>(path, "generator"));
    detail::read_weights(path, m.params());
    return m;
}
inline TisnModel load_tisn(const std::string& path) {
    TisnModel m(detail::read_sidecar<TisnConfig>(path, "tisn"));
    detail::read_weights(path, m.params());
    return m;
}
inline PatchDiscriminator load_discriminator(const std::string& path) {
    PatchDiscriminator m(detail::read_sidecar<DiscriminatorConfig>(path, "discriminator"));
    detail::read_weights(path, m.params());
    return m;
}

}  // namespace octseg::nn
