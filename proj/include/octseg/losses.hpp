#pragma once

#include <cmath>

#include "octseg/nn/tensor.hpp"
#include "octseg/types.hpp"

namespace octseg {

struct CGanLossConfig {
    double lambda = 100.0;  // reconstruction weight
    double alpha = 10.0;    // background penalty multiplier
};

inline void validate(const CGanLossConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw ValidationError("loss config: lambda must be > 0");
    if (!(cfg.alpha >= 1.0)) throw ValidationError("loss config: alpha must be >= 1");
}

namespace detail {
constexpr double kLogEps = 1e-7;  // keeps log() finite at saturated scores

inline double clamped_score(double s) {
    if (s < 0.0 || s > 1.0) throw ValidationError("adversarial score outside [0,1]");
    return std::clamp(s, kLogEps, 1.0 - kLogEps);
}
}  // namespace detail

struct AdversarialLoss {
    double loss_d = 0.0;      // -mean[log d_real + log(1 - d_fake)]
    double loss_g_adv = 0.0;  // -mean[log d_fake] (non-saturating form)
};

inline AdversarialLoss adversarial_loss(const nn::Tensor& d_real, const nn::Tensor& d_fake) {
    if (d_real.v.empty() || d_fake.v.empty()) throw ValidationError("adversarial_loss: empty score grid");
    AdversarialLoss out;
    for (double s : d_real.v) out.loss_d -= std::log(detail::clamped_score(s));
    out.loss_d /= static_cast<double>(d_real.v.size());
    double fake_term = 0.0;
    for (double s : d_fake.v) {
        const double c = detail::clamped_score(s);
        fake_term -= std::log(1.0 - c);
        out.loss_g_adv -= std::log(c);
    }
    out.loss_d += fake_term / static_cast<double>(d_fake.v.size());
    out.loss_g_adv /= static_cast<double>(d_fake.v.size());
    return out;
}

// d(loss_D)/d(d_real)
inline nn::Tensor adversarial_grad_real(const nn::Tensor& d_real) {
    nn::Tensor g = d_real;
    const double n = static_cast<double>(d_real.v.size());
    for (auto& s : g.v) s = -1.0 / (detail::clamped_score(s) * n);
    return g;
}

// d(loss_D)/d(d_fake)
inline nn::Tensor adversarial_grad_fake_for_d(const nn::Tensor& d_fake) {
    nn::Tensor g = d_fake;
    const double n = static_cast<double>(d_fake.v.size());
    for (auto& s : g.v) s = 1.0 / ((1.0 - detail::clamped_score(s)) * n);
    return g;
}

// d(loss_G_adv)/d(d_fake)
inline nn::Tensor adversarial_grad_fake_for_g(const nn::Tensor& d_fake) {
    nn::Tensor g = d_fake;
    const double n = static_cast<double>(d_fake.v.size());
    for (auto& s : g.v) s = -1.0 / (detail::clamped_score(s) * n);
    return g;
}

inline double l1_loss(const Image& y_t, const Image& y_f) {
    require_same_shape(y_t, y_f, "l1_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < y_t.v.size(); ++i) sum += std::abs(y_t.v[i] - y_f.v[i]);
    return sum / static_cast<double>(y_t.v.size());
}

inline double l1_loss(const PreSegImage& y_t, const PreSegImage& y_f) { return l1_loss(y_t.pixels, y_f.pixels); }

inline void check_binary(const ByteMask& w) {
    for (auto v : w.v)
        if (v > 1) throw ValidationError("weight mask must be binary");
}

// Mean of [alpha*w + (1-w)] |y_t - y_f|: background pixels (w=1) cost alpha
// times as much as foreground.
inline double weighted_l1_loss(const Image& y_t, const Image& y_f, const WeightMask& w, double alpha) {
    require_same_shape(y_t, y_f, "weighted_l1_loss");
    if (w.pixels.rows != y_t.rows || w.pixels.cols != y_t.cols)
        throw ValidationError("weighted_l1_loss: mask shape mismatch");
    if (alpha < 1.0) throw ValidationError("weighted_l1_loss: alpha must be >= 1");
    check_binary(w.pixels);
    double sum = 0.0;
    for (std::size_t i = 0; i < y_t.v.size(); ++i) {
        const double weight = w.pixels.v[i] ? alpha : 1.0;
        sum += weight * std::abs(y_t.v[i] - y_f.v[i]);
    }
    return sum / static_cast<double>(y_t.v.size());
}

// Gradient w.r.t. y_f. Exact ties contribute subgradient 0.
inline Image weighted_l1_grad(const Image& y_t, const Image& y_f, const WeightMask& w, double alpha) {
    require_same_shape(y_t, y_f, "weighted_l1_grad");
    Image g(y_t.rows, y_t.cols);
    const double n = static_cast<double>(y_t.v.size());
    for (std::size_t i = 0; i < y_t.v.size(); ++i) {
        const double weight = w.pixels.v[i] ? alpha : 1.0;
        const double d = y_f.v[i] - y_t.v[i];
        g.v[i] = weight * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    return g;
}

inline double generator_objective(double loss_g_adv, double weighted_l1, double lambda) {
    if (!(lambda > 0.0)) throw ValidationError("generator_objective: lambda must be > 0");
    return loss_g_adv + lambda * weighted_l1;
}

// Mean over channels and pixels of the squared difference.
inline double mse_loss(const nn::Tensor& pred, const nn::Tensor& target) {
    if (!pred.same_shape(target)) throw ValidationError("mse_loss: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const double d = pred.v[i] - target.v[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.v.size());
}

inline nn::Tensor mse_grad(const nn::Tensor& pred, const nn::Tensor& target) {
    if (!pred.same_shape(target)) throw ValidationError("mse_grad: shape mismatch");
    nn::Tensor g = pred;
    const double n = static_cast<double>(pred.v.size());
    for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] = 2.0 * (pred.v[i] - target.v[i]) / n;
    return g;
}

}  // namespace octseg
