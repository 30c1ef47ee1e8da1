#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "octseg/common.hpp"
#include "octseg/nn/tensor.hpp"
#include "octseg/types.hpp"

namespace octseg {

constexpr double kMissingColumn = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// Per column, the smallest row index holding foreground; NaN where a column
// has none. Errors when the whole mask is background.
inline std::vector<double> extract_interface(const BinaryMask& mask) {
    std::vector<double> rows(mask.pixels.cols, kMissingColumn);
    bool any = false;
    for (int c = 0; c < mask.pixels.cols; ++c)
        for (int r = 0; r < mask.pixels.rows; ++r)
            if (mask.pixels.at(r, c)) {
                rows[c] = r;
                any = true;
                break;
            }
    if (!any) throw ValidationError("extract_interface: mask contains no foreground");
    return rows;
}

namespace detail {

inline double tricube(double u) {
    const double a = 1.0 - u * u * u;
    return a > 0.0 ? a * a * a : 0.0;
}

inline double bisquare(double u) {
    const double a = 1.0 - u * u;
    return a > 0.0 ? a * a : 0.0;
}

// Weighted least-squares line through (xs, ys) with weights w, evaluated at x0.
inline double wls_at(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& w,
                     double x0) {
    double sw = 0.0, swx = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sw += w[i];
        swx += w[i] * xs[i];
        swy += w[i] * ys[i];
    }
    const double mx = swx / sw, my = swy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (ys[i] - my);
    }
    const double slope = sxx > 1e-12 ? sxy / sxx : 0.0;
    return my + slope * (x0 - mx);
}

// One locally weighted fit at x0 over the k contiguous nearest data points,
// with per-point robustness weights rho.
inline double lowess_at(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& rho,
                        int k, double x0) {
    const int n = static_cast<int>(xs.size());
    int lo = 0;
    while (lo + k < n && xs[lo + k] - x0 < x0 - xs[lo]) ++lo;  // slide window towards x0
    double dmax = 0.0;
    for (int i = lo; i < lo + k; ++i) dmax = std::max(dmax, std::abs(xs[i] - x0));
    std::vector<double> wxs(k), wys(k), w(k);
    double wsum = 0.0;
    for (int i = 0; i < k; ++i) {
        wxs[i] = xs[lo + i];
        wys[i] = ys[lo + i];
        const double u = dmax > 0.0 ? std::abs(wxs[i] - x0) / dmax : 0.0;
        w[i] = tricube(u) * rho[lo + i];
        wsum += w[i];
    }
    if (wsum <= 0.0) std::fill(w.begin(), w.end(), 1.0);  // degenerate window, fall back to OLS
    return wls_at(wxs, wys, w, x0);
}

}  // namespace detail

// Locally weighted linear regression over the non-missing columns (tricube
// weights, bisquare robustness reweighting), evaluated at every column so
// missing ones are interpolated. Output is intentionally unclamped; callers
// clamp to the image height where it is known.
inline InterfaceCurve fit_curve(const std::vector<double>& raw_rows, double fraction, int robustness_iterations = 2) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("fit_curve: fraction must lie in (0,1]");
    if (robustness_iterations < 0) throw ValidationError("fit_curve: negative robustness iterations");
    std::vector<double> xs, ys;
    for (std::size_t c = 0; c < raw_rows.size(); ++c)
        if (!is_missing(raw_rows[c])) {
            xs.push_back(static_cast<double>(c));
            ys.push_back(raw_rows[c]);
        }
    const int n = static_cast<int>(xs.size());
    if (n < 2) throw ValidationError("fit_curve: need at least 2 non-missing columns");
    const int k = std::clamp(static_cast<int>(std::lround(fraction * n)), 2, n);

    std::vector<double> rho(n, 1.0);
    for (int it = 0; it < robustness_iterations; ++it) {
        std::vector<double> res(n);
        for (int i = 0; i < n; ++i) res[i] = std::abs(ys[i] - detail::lowess_at(xs, ys, rho, k, xs[i]));
        const double worst = *std::max_element(res.begin(), res.end());
        if (worst <= 1e-12) break;  // fit already exact everywhere
        // floor the scale so a few extreme outliers among otherwise exact
        // residuals still get downweighted instead of breaking the pass
        const double s = std::max(median(res), 1e-7 * worst);
        for (int i = 0; i < n; ++i) rho[i] = detail::bisquare(res[i] / (6.0 * s));
    }

    InterfaceCurve curve;
    curve.fit_fraction = fraction;
    curve.rows.resize(raw_rows.size());
    for (std::size_t c = 0; c < raw_rows.size(); ++c)
        curve.rows[c] = detail::lowess_at(xs, ys, rho, k, static_cast<double>(c));
    return curve;
}

inline InterfaceCurve clamp_curve(InterfaceCurve curve, int height) {
    for (auto& r : curve.rows) r = std::clamp(r, 0.0, static_cast<double>(height - 1));
    return curve;
}

// Argmax over the two probability channels; exact ties break to background.
inline BinaryMask mask_from_probabilities(const nn::Tensor& pred) {
    if (pred.ch != 2) throw ValidationError("mask_from_probabilities: expected 2 channels");
    BinaryMask mask;
    mask.pixels = ByteMask(pred.h, pred.w);
    for (int r = 0; r < pred.h; ++r)
        for (int c = 0; c < pred.w; ++c) mask.pixels.at(r, c) = pred.at(0, r, c) > pred.at(1, r, c) ? 1 : 0;
    return mask;
}

}  // namespace octseg
