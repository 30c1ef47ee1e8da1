#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "octseg/nn/tensor.hpp"

namespace octseg::nn {

// im2col convolution backed by Eigen GEMM. Caches the column matrix from the
// forward pass for the weight/input gradients.
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 3, stride = 1, dilation = 1, pad = 1;
    Param weight;  // row-major [out_ch, in_ch*k*k]
    Param bias;    // [out_ch]
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    Mat col;  // [in_ch*k*k, out_h*out_w]

    Conv2d() = default;
    Conv2d(int in_ch_, int out_ch_, int k_, int stride_ = 1, int dilation_ = 1, int pad_ = -1)
        : in_ch(in_ch_),
          out_ch(out_ch_),
          k(k_),
          stride(stride_),
          dilation(dilation_),
          pad(pad_ >= 0 ? pad_ : dilation_ * (k_ - 1) / 2),
          weight(static_cast<std::size_t>(out_ch_) * in_ch_ * k_ * k_),
          bias(static_cast<std::size_t>(out_ch_)) {}

    void init(std::mt19937_64& rng) {
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& x : weight.w) x = dist(rng);
        std::fill(bias.w.begin(), bias.w.end(), 0.0);
    }

    int out_dim(int n) const { return (n + 2 * pad - dilation * (k - 1) - 1) / stride + 1; }

    Tensor forward(const Tensor& x) {
        if (x.ch != in_ch) throw ValidationError("Conv2d: channel mismatch");
        in_h = x.h;
        in_w = x.w;
        out_h = out_dim(x.h);
        out_w = out_dim(x.w);
        if (out_h <= 0 || out_w <= 0) throw ValidationError("Conv2d: input too small");
        col.resize(static_cast<Eigen::Index>(in_ch) * k * k, static_cast<Eigen::Index>(out_h) * out_w);
        for (int c = 0; c < in_ch; ++c)
            for (int kr = 0; kr < k; ++kr)
                for (int kc = 0; kc < k; ++kc) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + kr) * k + kc;
                    for (int orow = 0; orow < out_h; ++orow) {
                        const int ir = orow * stride - pad + kr * dilation;
                        for (int ocol = 0; ocol < out_w; ++ocol) {
                            const int ic = ocol * stride - pad + kc * dilation;
                            col(row, static_cast<Eigen::Index>(orow) * out_w + ocol) =
                                (ir >= 0 && ir < x.h && ic >= 0 && ic < x.w) ? x.at(c, ir, ic) : 0.0;
                        }
                    }
                }
        Eigen::Map<const Mat> W(weight.w.data(), out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
        Tensor y(out_ch, out_h, out_w);
        Eigen::Map<Mat> Y(y.v.data(), out_ch, static_cast<Eigen::Index>(out_h) * out_w);
        Y.noalias() = W * col;
        for (int oc = 0; oc < out_ch; ++oc) Y.row(oc).array() += bias.w[oc];
        return y;
    }

    Tensor backward(const Tensor& dy) {
        Eigen::Map<const Mat> dY(dy.v.data(), out_ch, static_cast<Eigen::Index>(out_h) * out_w);
        Eigen::Map<Mat> dW(weight.g.data(), out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
        dW.noalias() += dY * col.transpose();
        for (int oc = 0; oc < out_ch; ++oc) bias.g[oc] += dY.row(oc).sum();
        Eigen::Map<const Mat> W(weight.w.data(), out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
        Mat dcol = W.transpose() * dY;
        Tensor dx(in_ch, in_h, in_w);
        for (int c = 0; c < in_ch; ++c)
            for (int kr = 0; kr < k; ++kr)
                for (int kc = 0; kc < k; ++kc) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + kr) * k + kc;
                    for (int orow = 0; orow < out_h; ++orow) {
                        const int ir = orow * stride - pad + kr * dilation;
                        if (ir < 0 || ir >= in_h) continue;
                        for (int ocol = 0; ocol < out_w; ++ocol) {
                            const int ic = ocol * stride - pad + kc * dilation;
                            if (ic < 0 || ic >= in_w) continue;
                            dx.at(c, ir, ic) += dcol(row, static_cast<Eigen::Index>(orow) * out_w + ocol);
                        }
                    }
                }
        return dx;
    }
};

struct ReLU {
    std::vector<std::uint8_t> active;
    Tensor forward(const Tensor& x) {
        active.assign(x.size(), 0);
        Tensor y = x;
        for (std::size_t i = 0; i < y.v.size(); ++i) {
            if (y.v[i] > 0.0)
                active[i] = 1;
            else
                y.v[i] = 0.0;
        }
        return y;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i)
            if (!active[i]) dx.v[i] = 0.0;
        return dx;
    }
};

struct LeakyReLU {
    double slope = 0.2;
    std::vector<std::uint8_t> active;
    Tensor forward(const Tensor& x) {
        active.assign(x.size(), 0);
        Tensor y = x;
        for (std::size_t i = 0; i < y.v.size(); ++i) {
            if (y.v[i] > 0.0)
                active[i] = 1;
            else
                y.v[i] *= slope;
        }
        return y;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i)
            if (!active[i]) dx.v[i] *= slope;
        return dx;
    }
};

struct Tanh {
    Tensor y_cache;
    Tensor forward(const Tensor& x) {
        y_cache = x;
        for (auto& v : y_cache.v) v = std::tanh(v);
        return y_cache;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= 1.0 - y_cache.v[i] * y_cache.v[i];
        return dx;
    }
};

struct Sigmoid {
    Tensor y_cache;
    Tensor forward(const Tensor& x) {
        y_cache = x;
        for (auto& v : y_cache.v) v = 1.0 / (1.0 + std::exp(-v));
        return y_cache;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y_cache.v[i] * (1.0 - y_cache.v[i]);
        return dx;
    }
};

// Per-pixel softmax across the channel dimension.
struct SoftmaxChannels {
    Tensor y_cache;
    Tensor forward(const Tensor& x) {
        y_cache = Tensor(x.ch, x.h, x.w);
        for (int r = 0; r < x.h; ++r)
            for (int c = 0; c < x.w; ++c) {
                double mx = x.at(0, r, c);
                for (int ch = 1; ch < x.ch; ++ch) mx = std::max(mx, x.at(ch, r, c));
                double sum = 0.0;
                for (int ch = 0; ch < x.ch; ++ch) {
                    const double e = std::exp(x.at(ch, r, c) - mx);
                    y_cache.at(ch, r, c) = e;
                    sum += e;
                }
                for (int ch = 0; ch < x.ch; ++ch) y_cache.at(ch, r, c) /= sum;
            }
        return y_cache;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx(dy.ch, dy.h, dy.w);
        for (int r = 0; r < dy.h; ++r)
            for (int c = 0; c < dy.w; ++c) {
                double dot = 0.0;
                for (int ch = 0; ch < dy.ch; ++ch) dot += dy.at(ch, r, c) * y_cache.at(ch, r, c);
                for (int ch = 0; ch < dy.ch; ++ch)
                    dx.at(ch, r, c) = y_cache.at(ch, r, c) * (dy.at(ch, r, c) - dot);
            }
        return dx;
    }
};

// Inverted dropout; identity when inactive so inference is deterministic by default.
struct Dropout {
    double rate = 0.5;
    std::vector<std::uint8_t> keep;
    bool was_active = false;
    Tensor forward(const Tensor& x, bool active, std::mt19937_64& rng) {
        was_active = active && rate > 0.0;
        if (!was_active) return x;
        std::bernoulli_distribution drop(rate);
        keep.assign(x.size(), 1);
        Tensor y = x;
        const double scale = 1.0 / (1.0 - rate);
        for (std::size_t i = 0; i < y.v.size(); ++i) {
            if (drop(rng)) {
                keep[i] = 0;
                y.v[i] = 0.0;
            } else {
                y.v[i] *= scale;
            }
        }
        return y;
    }
    Tensor backward(const Tensor& dy) {
        if (!was_active) return dy;
        Tensor dx = dy;
        const double scale = 1.0 / (1.0 - rate);
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] = keep[i] ? dx.v[i] * scale : 0.0;
        return dx;
    }
};

// 2x2 max pooling, stride 2; argmax routing cached for the backward pass.
struct MaxPool2 {
    int in_h = 0, in_w = 0;
    std::vector<int> argmax;  // flat input index per output element
    Tensor forward(const Tensor& x) {
        if (x.h % 2 != 0 || x.w % 2 != 0) throw ValidationError("MaxPool2: odd spatial dims");
        in_h = x.h;
        in_w = x.w;
        Tensor y(x.ch, x.h / 2, x.w / 2);
        argmax.assign(y.size(), 0);
        std::size_t o = 0;
        for (int c = 0; c < x.ch; ++c)
            for (int r = 0; r < y.h; ++r)
                for (int cc = 0; cc < y.w; ++cc, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    int best_idx = 0;
                    for (int dr = 0; dr < 2; ++dr)
                        for (int dc = 0; dc < 2; ++dc) {
                            const int ir = 2 * r + dr, ic = 2 * cc + dc;
                            const double v = x.at(c, ir, ic);
                            if (v > best) {
                                best = v;
                                best_idx = (c * in_h + ir) * in_w + ic;
                            }
                        }
                    y.v[o] = best;
                    argmax[o] = best_idx;
                }
        return y;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx(dy.ch, in_h, in_w);
        for (std::size_t o = 0; o < dy.v.size(); ++o) dx.v[argmax[o]] += dy.v[o];
        return dx;
    }
};

// 2x nearest-neighbour upsampling.
struct NearestUp2 {
    Tensor forward(const Tensor& x) {
        Tensor y(x.ch, x.h * 2, x.w * 2);
        for (int c = 0; c < x.ch; ++c)
            for (int r = 0; r < y.h; ++r)
                for (int cc = 0; cc < y.w; ++cc) y.at(c, r, cc) = x.at(c, r / 2, cc / 2);
        return y;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx(dy.ch, dy.h / 2, dy.w / 2);
        for (int c = 0; c < dy.ch; ++c)
            for (int r = 0; r < dy.h; ++r)
                for (int cc = 0; cc < dy.w; ++cc) dx.at(c, r / 2, cc / 2) += dy.at(c, r, cc);
        return dx;
    }
};

}  // namespace octseg::nn
