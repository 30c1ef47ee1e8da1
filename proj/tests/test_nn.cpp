#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <random>

#include "octseg/nn/layers.hpp"
#include "octseg/nn/models.hpp"

using namespace octseg;
using namespace octseg::nn;
namespace fs = std::filesystem;

namespace {

Tensor random_tensor(int ch, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(ch, h, w);
    for (auto& v : t.v) v = u(rng);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

// Central finite differences of sum(f(x) * r) with respect to x.
template <class Forward>
void check_input_gradient(Forward&& f, const Tensor& x, const Tensor& grad, const Tensor& r, double tol) {
    const double eps = 1e-6;
    Tensor xp = x;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        xp.v[i] = x.v[i] + eps;
        const double up = dot(f(xp), r);
        xp.v[i] = x.v[i] - eps;
        const double dn = dot(f(xp), r);
        xp.v[i] = x.v[i];
        const double fd = (up - dn) / (2.0 * eps);
        CHECK(grad.v[i] == Catch::Approx(fd).margin(1e-7).epsilon(1e-5));
    }
}

}  // namespace

TEST_CASE("1x1 convolution is an exact channel mix") {
    Conv2d conv(2, 1, 1);
    conv.weight.w = {0.5, -2.0};
    conv.bias.w = {0.25};
    Tensor x(2, 2, 3);
    for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = double(i);
    const Tensor y = conv.forward(x);
    REQUIRE(y.ch == 1);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(y.at(0, r, c) == Catch::Approx(0.5 * x.at(0, r, c) - 2.0 * x.at(1, r, c) + 0.25));
}

TEST_CASE("3x3 convolution backward matches finite differences") {
    std::mt19937_64 rng(11);
    Conv2d conv(1, 1, 3);
    conv.init(rng);
    const Tensor x = random_tensor(1, 4, 5, 21);
    const Tensor r = random_tensor(1, 4, 5, 22);
    conv.forward(x);
    for (auto* p : std::vector<Param*>{&conv.weight, &conv.bias}) p->zero_grad();
    const Tensor dx = conv.backward(r);
    check_input_gradient([&](const Tensor& t) { return conv.forward(t); }, x, dx, r, 1e-5);

    conv.forward(x);  // restore cached column matrix for x
    for (auto* p : std::vector<Param*>{&conv.weight, &conv.bias}) p->zero_grad();
    conv.backward(r);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < conv.weight.w.size(); ++i) {
        const double keep = conv.weight.w[i];
        conv.weight.w[i] = keep + eps;
        const double up = dot(conv.forward(x), r);
        conv.weight.w[i] = keep - eps;
        const double dn = dot(conv.forward(x), r);
        conv.weight.w[i] = keep;
        CHECK(conv.weight.g[i] == Catch::Approx((up - dn) / (2 * eps)).margin(1e-7).epsilon(1e-5));
    }
    const double keep = conv.bias.w[0];
    conv.bias.w[0] = keep + eps;
    const double up = dot(conv.forward(x), r);
    conv.bias.w[0] = keep - eps;
    const double dn = dot(conv.forward(x), r);
    conv.bias.w[0] = keep;
    CHECK(conv.bias.g[0] == Catch::Approx((up - dn) / (2 * eps)).margin(1e-7).epsilon(1e-5));
}

TEST_CASE("dilated convolution backward matches finite differences") {
    std::mt19937_64 rng(13);
    Conv2d conv(2, 2, 3, 1, 2);
    conv.init(rng);
    const Tensor x = random_tensor(2, 6, 6, 31);
    const Tensor r = random_tensor(2, 6, 6, 32);
    conv.forward(x);
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    const Tensor dx = conv.backward(r);
    check_input_gradient([&](const Tensor& t) { return conv.forward(t); }, x, dx, r, 1e-5);
}

TEST_CASE("dilated block backward matches finite differences") {
    std::mt19937_64 rng(17);
    DilatedBlock block(2, 3, {1, 2});
    block.init(rng);
    const Tensor x = random_tensor(2, 6, 6, 41, 0.0, 1.0);
    const Tensor r = random_tensor(3, 6, 6, 42);
    block.forward(x);
    const Tensor dx = block.backward(r);
    check_input_gradient([&](const Tensor& t) { return block.forward(t); }, x, dx, r, 1e-5);
}

TEST_CASE("max pooling halves dimensions and routes gradients to the argmax") {
    Tensor x(1, 4, 4);
    for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = double(i);
    MaxPool2 pool;
    const Tensor y = pool.forward(x);
    REQUIRE(y.h == 2);
    REQUIRE(y.w == 2);
    CHECK(y.at(0, 0, 0) == 5.0);
    CHECK(y.at(0, 1, 1) == 15.0);
    Tensor dy(1, 2, 2);
    dy.v = {1.0, 2.0, 3.0, 4.0};
    const Tensor dx = pool.backward(dy);
    CHECK(dx.at(0, 1, 1) == 1.0);
    CHECK(dx.at(0, 0, 0) == 0.0);
    CHECK(dx.at(0, 3, 3) == 4.0);

    Tensor odd(1, 3, 4);
    CHECK_THROWS_AS(pool.forward(odd), ValidationError);
}

TEST_CASE("nearest upsampling doubles dimensions by replication") {
    Tensor x(1, 2, 2);
    x.v = {1.0, 2.0, 3.0, 4.0};
    NearestUp2 up;
    const Tensor y = up.forward(x);
    REQUIRE(y.h == 4);
    CHECK(y.at(0, 0, 0) == 1.0);
    CHECK(y.at(0, 0, 1) == 1.0);
    CHECK(y.at(0, 1, 0) == 1.0);
    CHECK(y.at(0, 3, 3) == 4.0);
    Tensor dy(1, 4, 4);
    std::fill(dy.v.begin(), dy.v.end(), 1.0);
    const Tensor dx = up.backward(dy);
    CHECK(dx.at(0, 0, 0) == 4.0);
}

TEST_CASE("channel softmax produces a distribution per pixel") {
    const Tensor x = random_tensor(3, 4, 4, 55, -5.0, 5.0);
    SoftmaxChannels sm;
    const Tensor y = sm.forward(x);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                CHECK(y.at(ch, r, c) > 0.0);
                s += y.at(ch, r, c);
            }
            CHECK(s == Catch::Approx(1.0));
        }
    const Tensor r = random_tensor(3, 4, 4, 56);
    sm.forward(x);
    const Tensor dx = sm.backward(r);
    check_input_gradient([&](const Tensor& t) { return sm.forward(t); }, x, dx, r, 1e-5);
}

TEST_CASE("inactive dropout is the identity; active dropout rescales survivors") {
    const Tensor x = random_tensor(1, 10, 10, 60, 0.5, 1.0);
    Dropout drop(0.5);
    std::mt19937_64 rng(1);
    const Tensor same = drop.forward(x, false, rng);
    CHECK(same.v == x.v);
    const Tensor dropped = drop.forward(x, true, rng);
    int zeros = 0;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        if (dropped.v[i] == 0.0)
            ++zeros;
        else
            CHECK(dropped.v[i] == Catch::Approx(2.0 * x.v[i]));
    }
    CHECK(zeros > 20);
    CHECK(zeros < 80);
}

TEST_CASE("generator maps two channels to a tanh-bounded plane") {
    GeneratorConfig cfg;
    cfg.levels = 2;
    cfg.base_width = 4;
    cfg.seed = 7;
    GeneratorModel gen(cfg);
    const Tensor x = random_tensor(2, 8, 12, 70);
    const Tensor y = gen.forward(x, false);
    REQUIRE(y.ch == 1);
    REQUIRE(y.h == 8);
    REQUIRE(y.w == 12);
    for (double v : y.v) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
    const Tensor y2 = gen.forward(x, false);
    CHECK(y.v == y2.v);  // inference has no stochastic path
}

TEST_CASE("generator rejects inputs not divisible by the pooling stride") {
    GeneratorConfig cfg;
    cfg.levels = 2;
    cfg.base_width = 4;
    GeneratorModel gen(cfg);
    Tensor bad(2, 6, 8);
    CHECK_THROWS_AS(gen.forward(bad, false), ValidationError);
}

TEST_CASE("tisn emits complementary class probability planes") {
    TisnConfig cfg;
    cfg.levels = 2;
    cfg.base_width = 4;
    cfg.seed = 9;
    TisnModel tisn(cfg);
    const Tensor x = random_tensor(2, 8, 8, 71, 0.0, 1.0);
    const Tensor y = tisn.forward(x, false);
    REQUIRE(y.ch == 2);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) CHECK(y.at(0, r, c) + y.at(1, r, c) == Catch::Approx(1.0));
}

TEST_CASE("discriminator output size follows the stride arithmetic") {
    DiscriminatorConfig cfg;
    cfg.layers = 2;
    cfg.base_width = 4;
    PatchDiscriminator disc(cfg);
    const Tensor x = random_tensor(3, 16, 16, 80);
    const Tensor y = disc.forward(x);
    REQUIRE(y.ch == 1);
    // 16 -> 8 -> 4 by stride, then two valid-ish k4 p1 convolutions: 4 -> 3 -> 2
    CHECK(y.h == 2);
    CHECK(y.w == 2);
    for (double v : y.v) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("parameter count scales roughly fourfold with width") {
    GeneratorConfig narrow;
    narrow.levels = 2;
    narrow.base_width = 8;
    GeneratorModel a(narrow);
    GeneratorConfig wide = narrow;
    wide.base_width = 16;
    GeneratorModel b(wide);
    const double ratio = double(count_parameters(b)) / double(count_parameters(a));
    CHECK(ratio > 3.2);
    CHECK(ratio < 4.2);
}

TEST_CASE("test-time input replication yields a unit-range pre-segmentation") {
    GeneratorConfig cfg;
    cfg.levels = 2;
    cfg.base_width = 4;
    cfg.seed = 13;
    GeneratorModel gen(cfg);
    Image tile(8, 8);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : tile.v) v = u(rng);
    const PreSegImage out = forward_with_test_time_input(gen, tile, "tile_0");
    CHECK(out.source_id == "tile_0");
    REQUIRE(out.pixels.rows == 8);
    for (double v : out.pixels.v) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("checkpoints round-trip weights bit-exactly and verify their kind") {
    const fs::path dir = fs::temp_directory_path() / "octseg_test_ckpt";
    fs::create_directories(dir);
    GeneratorConfig cfg;
    cfg.levels = 2;
    cfg.base_width = 4;
    cfg.seed = 21;
    GeneratorModel gen(cfg);
    const Tensor x = random_tensor(2, 8, 8, 90);
    const Tensor before = gen.forward(x, false);
    const std::string path = (dir / "gen.ckpt").string();
    save_checkpoint(gen, path, 42);

    GeneratorModel back = load_generator(path);
    const Tensor after = back.forward(x, false);
    CHECK(before.v == after.v);

    CHECK_THROWS_AS(load_tisn(path), RuntimeFailure);

    // truncate the weight file
    const auto size = fs::file_size(path);
    fs::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_generator(path), RuntimeFailure);
}

TEST_CASE("distinct seeds give distinct initializations") {
    GeneratorConfig a;
    a.levels = 2;
    a.base_width = 4;
    a.seed = 1;
    GeneratorConfig b = a;
    b.seed = 2;
    GeneratorModel ga(a), gb(b);
    CHECK(ga.params()[0]->w != gb.params()[0]->w);
    GeneratorModel ga2(a);
    CHECK(ga.params()[0]->w == ga2.params()[0]->w);
}
