#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <fftw3.h>

#include "octseg/filters.hpp"
#include "octseg/nn/models.hpp"
#include "octseg/postprocess.hpp"
#include "octseg/types.hpp"

namespace octseg {

struct TradConfig {
    double clip_low_pct = 1.0;
    double clip_high_pct = 99.0;
    int median_radius = 1;
    double smooth_sigma = 1.0;
    double log_gabor_wavelength_px = 8.0;
    double log_gabor_sigma_ratio = 0.55;  // sigma/f0 ratio of the radial log-Gabor
    double energy_threshold_pct = 95.0;
    int min_run = 3;  // consecutive supra-threshold pixels required per column
    double fit_fraction = 0.1;
    int robustness_iterations = 2;
};

inline void validate(const TradConfig& cfg) {
    if (!(cfg.clip_low_pct >= 0.0 && cfg.clip_low_pct < cfg.clip_high_pct && cfg.clip_high_pct <= 100.0))
        throw ValidationError("trad config: need 0 <= clip_low < clip_high <= 100");
    if (!(cfg.log_gabor_wavelength_px > 2.0)) throw ValidationError("trad config: wavelength must exceed 2 px");
    if (!(cfg.log_gabor_sigma_ratio > 0.0 && cfg.log_gabor_sigma_ratio < 1.0))
        throw ValidationError("trad config: sigma_ratio must lie in (0,1)");
    if (!(cfg.energy_threshold_pct > 0.0 && cfg.energy_threshold_pct < 100.0))
        throw ValidationError("trad config: energy threshold percentile must lie in (0,100)");
    if (cfg.min_run < 1) throw ValidationError("trad config: min_run must be >= 1");
}

namespace detail {

struct Fft2 {
    int rows, cols;
    std::vector<std::complex<double>> buf;
    fftw_plan fwd, inv;

    Fft2(int rows_, int cols_) : rows(rows_), cols(cols_), buf(static_cast<std::size_t>(rows_) * cols_) {
        auto* p = reinterpret_cast<fftw_complex*>(buf.data());
        fwd = fftw_plan_dft_2d(rows, cols, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        inv = fftw_plan_dft_2d(rows, cols, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft2() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    void forward() { fftw_execute(fwd); }
    void inverse() { fftw_execute(inv); }  // unnormalized; caller divides by rows*cols
};

inline double centered_freq(int i, int n) {
    const int s = i <= n / 2 ? i : i - n;
    return static_cast<double>(s) / n;
}

}  // namespace detail

struct MonogenicSignal {
    Image even, odd1, odd2;
};

// Band-passes with an isotropic log-Gabor radial filter and computes the two
// Riesz components in the frequency domain. The image is mirror-extended to
// twice its size first; the raw DFT is periodic and would otherwise see a
// spurious edge where the bright bottom rows wrap around to the dark top.
inline MonogenicSignal monogenic_signal(const Image& input, double wavelength_px, double sigma_ratio) {
    if (!(wavelength_px > 2.0)) throw ValidationError("monogenic: wavelength must exceed 2 px");
    if (wavelength_px >= std::min(input.rows, input.cols))
        throw ValidationError("monogenic: wavelength must be smaller than the image");
    for (double v : input.v)
        if (!std::isfinite(v)) throw ValidationError("monogenic: non-finite input");

    Image img(2 * input.rows, 2 * input.cols);
    for (int r = 0; r < img.rows; ++r) {
        const int sr = r < input.rows ? r : 2 * input.rows - 1 - r;
        for (int c = 0; c < img.cols; ++c) {
            const int sc = c < input.cols ? c : 2 * input.cols - 1 - c;
            img.at(r, c) = input.at(sr, sc);
        }
    }

    const int H = img.rows, W = img.cols;
    const double n_inv = 1.0 / (static_cast<double>(H) * W);
    const double f0 = 1.0 / wavelength_px;
    const double log_sr = std::log(sigma_ratio);
    const double denom = 2.0 * log_sr * log_sr;

    detail::Fft2 fft(H, W);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) fft.buf[static_cast<std::size_t>(r) * W + c] = img.at(r, c);
    fft.forward();
    const std::vector<std::complex<double>> spectrum = fft.buf;

    MonogenicSignal out{Image(H, W), Image(H, W), Image(H, W)};
    std::vector<std::complex<double>> filtered(spectrum.size());

    // radial log-Gabor, zero at DC
    std::vector<double> lg(spectrum.size(), 0.0);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const double u1 = detail::centered_freq(r, H);
            const double u2 = detail::centered_freq(c, W);
            const double w = std::sqrt(u1 * u1 + u2 * u2);
            if (w > 0.0) {
                const double lr = std::log(w / f0);
                lg[static_cast<std::size_t>(r) * W + c] = std::exp(-lr * lr / denom);
            }
        }

    auto inverse_real = [&](Image& dst) {
        fft.inverse();
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) dst.at(r, c) = fft.buf[static_cast<std::size_t>(r) * W + c].real() * n_inv;
    };

    for (std::size_t i = 0; i < spectrum.size(); ++i) fft.buf[i] = spectrum[i] * lg[i];
    filtered = fft.buf;
    inverse_real(out.even);

    const std::complex<double> j(0.0, 1.0);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const double u1 = detail::centered_freq(r, H);
            const double u2 = detail::centered_freq(c, W);
            const double w = std::sqrt(u1 * u1 + u2 * u2);
            const std::size_t i = static_cast<std::size_t>(r) * W + c;
            fft.buf[i] = w > 0.0 ? filtered[i] * (j * u1 / w) : 0.0;
        }
    inverse_real(out.odd1);

    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const double u1 = detail::centered_freq(r, H);
            const double u2 = detail::centered_freq(c, W);
            const double w = std::sqrt(u1 * u1 + u2 * u2);
            const std::size_t i = static_cast<std::size_t>(r) * W + c;
            fft.buf[i] = w > 0.0 ? filtered[i] * (j * u2 / w) : 0.0;
        }
    inverse_real(out.odd2);

    MonogenicSignal cropped{Image(input.rows, input.cols), Image(input.rows, input.cols),
                            Image(input.rows, input.cols)};
    for (int r = 0; r < input.rows; ++r)
        for (int c = 0; c < input.cols; ++c) {
            cropped.even.at(r, c) = out.even.at(r, c);
            cropped.odd1.at(r, c) = out.odd1.at(r, c);
            cropped.odd2.at(r, c) = out.odd2.at(r, c);
        }
    return cropped;
}

inline Image monogenic_local_energy(const Image& img, double wavelength_px, double sigma_ratio) {
    const MonogenicSignal m = monogenic_signal(img, wavelength_px, sigma_ratio);
    Image energy(img.rows, img.cols);
    for (std::size_t i = 0; i < energy.v.size(); ++i)
        energy.v[i] = std::sqrt(m.even.v[i] * m.even.v[i] + m.odd1.v[i] * m.odd1.v[i] + m.odd2.v[i] * m.odd2.v[i]);
    return energy;
}

// Traditional segmenter: percentile clip, median + Gaussian smoothing,
// monogenic local energy, per-column topmost run of supra-threshold pixels,
// then the shared curve fit. The threshold is a percentile of this image's
// own energy distribution.
inline InterfaceCurve trad_segment(const Image& input, const TradConfig& cfg) {
    validate(cfg);
    Image img = percentile_clip(input, cfg.clip_low_pct, cfg.clip_high_pct);
    img = median_filter(img, cfg.median_radius);
    img = gaussian_blur(img, cfg.smooth_sigma);
    const Image energy = monogenic_local_energy(img, cfg.log_gabor_wavelength_px, cfg.log_gabor_sigma_ratio);
    const double threshold = percentile(energy.v, cfg.energy_threshold_pct);

    std::vector<double> raw(input.cols, kMissingColumn);
    int found = 0;
    for (int c = 0; c < input.cols; ++c) {
        int run = 0;
        for (int r = 0; r < input.rows; ++r) {
            if (energy.at(r, c) > threshold) {
                if (++run >= cfg.min_run) {
                    // The topmost sustained run picks the shallowest response band; its
                    // single topmost pixel sits in the filter skirt above the edge, so
                    // the estimate is the energy peak inside that run.
                    int start = r - cfg.min_run + 1;
                    int best = start;
                    for (int rr = start; rr < input.rows && energy.at(rr, c) > threshold; ++rr) {
                        if (energy.at(rr, c) > energy.at(best, c)) best = rr;
                    }
                    raw[c] = best;
                    ++found;
                    break;
                }
            } else {
                run = 0;
            }
        }
    }
    if (found < 2) throw RuntimeFailure("trad_segment: no interface found (supra-threshold columns: " +
                                        std::to_string(found) + ")");
    return clamp_curve(fit_curve(raw, cfg.fit_fraction, cfg.robustness_iterations), input.rows);
}

inline InterfaceCurve trad_segment(const BScan& scan, const TradConfig& cfg) { return trad_segment(scan.pixels, cfg); }
inline InterfaceCurve trad_segment(const PreSegImage& preseg, const TradConfig& cfg) {
    return trad_segment(preseg.pixels, cfg);
}

// The hybrid framework: cGAN pre-segmentation first, then the traditional
// segmenter on the pre-segmentation alone (never the original image). The
// presegmenter maps Image -> Image.
template <class Presegmenter>
InterfaceCurve hybrid_segment_with(const BScan& scan, Presegmenter&& presegment, const TradConfig& cfg) {
    PreSegImage preseg;
    preseg.source_id = scan.id;
    preseg.pixels = presegment(scan.pixels);
    return trad_segment(preseg, cfg);
}

inline InterfaceCurve hybrid_segment(const BScan& scan, nn::GeneratorModel& generator, const TradConfig& cfg) {
    return hybrid_segment_with(
        scan, [&](const Image& img) { return nn::forward_with_test_time_input(generator, img, scan.id).pixels; }, cfg);
}

}  // namespace octseg
