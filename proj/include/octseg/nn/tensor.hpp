#pragma once

#include <vector>

#include <Eigen/Core>

#include "octseg/common.hpp"

namespace octseg::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Channel-major feature map: index (channel, row, col), row-major within a channel.
struct Tensor {
    int ch = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int ch_, int h_, int w_) : ch(ch_), h(h_), w(w_), v(static_cast<std::size_t>(ch_) * h_ * w_, 0.0) {}

    double& at(int c, int r, int x) { return v[(static_cast<std::size_t>(c) * h + r) * w + x]; }
    double at(int c, int r, int x) const { return v[(static_cast<std::size_t>(c) * h + r) * w + x]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return ch == o.ch && h == o.h && w == o.w; }

    double* plane(int c) { return v.data() + static_cast<std::size_t>(c) * h * w; }
    const double* plane(int c) const { return v.data() + static_cast<std::size_t>(c) * h * w; }
};

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.h != b.h || a.w != b.w) throw ValidationError("concat_channels: spatial shape mismatch");
    Tensor out(a.ch + b.ch, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
    return out;
}

inline void split_channels(const Tensor& joined, Tensor& a, Tensor& b, int ch_a) {
    a = Tensor(ch_a, joined.h, joined.w);
    b = Tensor(joined.ch - ch_a, joined.h, joined.w);
    std::copy(joined.v.begin(), joined.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()), a.v.begin());
    std::copy(joined.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()), joined.v.end(), b.v.begin());
}

inline Image tensor_plane_to_image(const Tensor& t, int channel) {
    Image img(t.h, t.w);
    std::copy(t.plane(channel), t.plane(channel) + static_cast<std::size_t>(t.h) * t.w, img.v.begin());
    return img;
}

inline Tensor image_to_tensor(const Image& img) {
    Tensor t(1, img.rows, img.cols);
    std::copy(img.v.begin(), img.v.end(), t.v.begin());
    return t;
}

// One learnable array plus its gradient accumulator.
struct Param {
    std::vector<double> w, g;
    explicit Param(std::size_t n = 0) : w(n, 0.0), g(n, 0.0) {}
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

}  // namespace octseg::nn
