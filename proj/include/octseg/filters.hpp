#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "octseg/common.hpp"

namespace octseg {

namespace detail {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

}  // namespace detail

inline Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const auto k = detail::gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size()) / 2;
    Image tmp(img.rows, img.cols), out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * img.at(r, detail::clamp_index(c + i, img.cols));
            tmp.at(r, c) = s;
        }
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.at(detail::clamp_index(r + i, img.rows), c);
            out.at(r, c) = s;
        }
    return out;
}

inline Image median_filter(const Image& img, int radius) {
    if (radius <= 0) return img;
    Image out(img.rows, img.cols);
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1));
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            window.clear();
            for (int dr = -radius; dr <= radius; ++dr)
                for (int dc = -radius; dc <= radius; ++dc)
                    window.push_back(img.at(detail::clamp_index(r + dr, img.rows), detail::clamp_index(c + dc, img.cols)));
            auto mid = window.begin() + window.size() / 2;
            std::nth_element(window.begin(), mid, window.end());
            out.at(r, c) = *mid;
        }
    return out;
}

inline Image bilateral_filter(const Image& img, double sigma_space, double sigma_range) {
    if (sigma_space <= 0.0 || sigma_range <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma_space)));
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            const double center = img.at(r, c);
            double sum = 0.0, wsum = 0.0;
            for (int dr = -radius; dr <= radius; ++dr)
                for (int dc = -radius; dc <= radius; ++dc) {
                    const double v = img.at(detail::clamp_index(r + dr, img.rows), detail::clamp_index(c + dc, img.cols));
                    const double w = std::exp(-0.5 * (dr * dr + dc * dc) / (sigma_space * sigma_space) -
                                              0.5 * (v - center) * (v - center) / (sigma_range * sigma_range));
                    sum += w * v;
                    wsum += w;
                }
            out.at(r, c) = sum / wsum;
        }
    return out;
}

// Rescales so the lo-th/hi-th intensity percentiles map to 0/1, clipping the tails.
inline Image percentile_clip(const Image& img, double lo_pct, double hi_pct) {
    if (!(lo_pct >= 0.0 && hi_pct <= 100.0 && lo_pct < hi_pct))
        throw ValidationError("percentile_clip: need 0 <= lo < hi <= 100");
    const double lo = percentile(img.v, lo_pct);
    const double hi = percentile(img.v, hi_pct);
    Image out(img.rows, img.cols);
    if (hi - lo < 1e-12) {
        std::fill(out.v.begin(), out.v.end(), 0.0);
        return out;
    }
    for (std::size_t i = 0; i < img.v.size(); ++i) out.v[i] = clamp01((img.v[i] - lo) / (hi - lo));
    return out;
}

inline double sample_bilinear(const Image& img, double r, double c) {
    r = std::clamp(r, 0.0, static_cast<double>(img.rows - 1));
    c = std::clamp(c, 0.0, static_cast<double>(img.cols - 1));
    const int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
    const int r1 = std::min(r0 + 1, img.rows - 1), c1 = std::min(c0 + 1, img.cols - 1);
    const double fr = r - r0, fc = c - c0;
    return (1 - fr) * ((1 - fc) * img.at(r0, c0) + fc * img.at(r0, c1)) +
           fr * ((1 - fc) * img.at(r1, c0) + fc * img.at(r1, c1));
}

inline Image resize_bilinear(const Image& img, int rows, int cols) {
    Image out(rows, cols);
    const double sr = rows > 1 ? static_cast<double>(img.rows - 1) / (rows - 1) : 0.0;
    const double sc = cols > 1 ? static_cast<double>(img.cols - 1) / (cols - 1) : 0.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out.at(r, c) = sample_bilinear(img, r * sr, c * sc);
    return out;
}

}  // namespace octseg
