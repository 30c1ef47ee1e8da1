#pragma once

#include <random>
#include <string>
#include <vector>

#include "octseg/common.hpp"
#include "octseg/filters.hpp"
#include "octseg/types.hpp"

namespace octseg {

// Gold-standard pre-segmentation: source pixels at/below the annotation row,
// exact zero strictly above it.
inline PreSegImage make_gold_preseg(const BScan& scan, const AnnotationCurve& ann) {
    if (ann.width() != scan.width()) throw ValidationError("make_gold_preseg: annotation width mismatch");
    ann.validate(scan.height());
    PreSegImage out;
    out.source_id = scan.id;
    out.pixels = Image(scan.height(), scan.width());
    for (int c = 0; c < scan.width(); ++c)
        for (int r = 0; r < scan.height(); ++r) out.pixels.at(r, c) = r < ann.rows[c] ? 0.0 : scan.pixels.at(r, c);
    return out;
}

// Penalty mask: 1 strictly above the annotation shifted down by shift_px
// (clamped to the bottom row), 0 at/below. The band between the annotation and
// the shifted contour carries foreground weight, protecting the interface from
// the background penalty.
inline WeightMask make_weight_mask(const AnnotationCurve& ann, int height, int shift_px) {
    if (shift_px < 0) throw ValidationError("make_weight_mask: shift_px must be >= 0");
    ann.validate(height);
    WeightMask mask;
    mask.shift_px = shift_px;
    mask.pixels = ByteMask(height, ann.width());
    for (int c = 0; c < ann.width(); ++c) {
        const int shifted = std::min(ann.rows[c] + shift_px, height - 1);
        for (int r = 0; r < height; ++r) mask.pixels.at(r, c) = r < shifted ? 1 : 0;
    }
    return mask;
}

// Foreground = interface row and everything below it.
inline BinaryMask make_binary_label(const AnnotationCurve& ann, int height) {
    ann.validate(height);
    BinaryMask mask;
    mask.pixels = ByteMask(height, ann.width());
    for (int c = 0; c < ann.width(); ++c)
        for (int r = 0; r < height; ++r) mask.pixels.at(r, c) = r >= ann.rows[c] ? 1 : 0;
    return mask;
}

// ---------------------------------------------------------------------------
// Augmentation.

enum class AugmentationKind { CganFlipOnly, TisnFull };

struct AugmentationPolicy {
    AugmentationKind kind = AugmentationKind::TisnFull;
    std::vector<std::string> transforms;  // empty = defaults for the kind
    double apply_probability = 0.5;       // per enabled transform (tisn-full)
    double gamma_min = 0.7, gamma_max = 1.5;
    double elastic_sigma = 6.0, elastic_amplitude = 8.0;
    double blur_sigma_min = 0.5, blur_sigma_max = 1.5;
    int median_radius = 1;
    double bilateral_sigma_space = 1.5, bilateral_sigma_range = 0.1;
    double noise_sigma_max = 0.03;
    double crop_scale_min = 0.85;
    double affine_max_rotation_deg = 3.0, affine_max_translate_frac = 0.05;
    double affine_scale_min = 0.95, affine_scale_max = 1.05;
    std::uint64_t seed = 0;

    std::vector<std::string> effective_transforms() const {
        if (!transforms.empty()) return transforms;
        if (kind == AugmentationKind::CganFlipOnly) return {"hflip"};
        return {"hflip", "gamma", "elastic", "gaussian-blur", "median-blur",
                "bilateral-blur", "gaussian-noise", "crop", "affine"};
    }
};

// One training sample with its aligned targets. Geometric transforms hit the
// image and every target identically; photometric transforms touch the image
// only. Targets flagged binary are re-thresholded at 0.5 after interpolation.
struct AlignedSample {
    Image image;
    std::vector<Image> targets;
    std::vector<bool> binary;
};

namespace detail {

inline const std::vector<std::string>& known_transforms() {
    static const std::vector<std::string> k = {"hflip",         "vflip",          "gamma", "elastic",
                                               "gaussian-blur", "median-blur",    "bilateral-blur",
                                               "gaussian-noise", "crop",          "affine"};
    return k;
}

inline Image flip_horizontal(const Image& img) {
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) out.at(r, c) = img.at(r, img.cols - 1 - c);
    return out;
}

inline Image flip_vertical(const Image& img) {
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) out.at(r, c) = img.at(img.rows - 1 - r, c);
    return out;
}

inline Image warp(const Image& img, const Image& dr, const Image& dc) {
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) out.at(r, c) = sample_bilinear(img, r + dr.at(r, c), c + dc.at(r, c));
    return out;
}

inline void rethreshold(AlignedSample& s) {
    for (std::size_t i = 0; i < s.targets.size(); ++i)
        if (i < s.binary.size() && s.binary[i])
            for (auto& v : s.targets[i].v) v = v >= 0.5 ? 1.0 : 0.0;
}

template <class F>
void apply_geometric(AlignedSample& s, F&& f) {
    s.image = f(s.image);
    for (auto& t : s.targets) t = f(t);
}

}  // namespace detail

inline AnnotationCurve flip_annotation(const AnnotationCurve& ann) {
    AnnotationCurve out = ann;
    std::reverse(out.rows.begin(), out.rows.end());
    return out;
}

inline void validate(const AugmentationPolicy& policy) {
    const auto& known = detail::known_transforms();
    for (const auto& t : policy.effective_transforms())
        if (std::find(known.begin(), known.end(), t) == known.end())
            throw ValidationError("augmentation: unknown transform " + t);
    if (policy.kind == AugmentationKind::CganFlipOnly) {
        const auto ts = policy.effective_transforms();
        if (ts.size() != 1 || ts[0] != "hflip")
            throw ValidationError("augmentation: cgan-flip-only admits exactly the horizontal flip");
    }
}

// cgan-flip-only returns {original, flipped} (static dataset doubling);
// tisn-full returns one randomized variant drawn from the rng.
inline std::vector<AlignedSample> augment(const AlignedSample& sample, const AugmentationPolicy& policy,
                                          std::mt19937_64& rng) {
    validate(policy);
    for (const auto& t : sample.targets) require_same_shape(sample.image, t, "augment targets");

    if (policy.kind == AugmentationKind::CganFlipOnly) {
        AlignedSample flipped = sample;
        detail::apply_geometric(flipped, [](const Image& im) { return detail::flip_horizontal(im); });
        return {sample, std::move(flipped)};
    }

    AlignedSample out = sample;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int rows = sample.image.rows, cols = sample.image.cols;
    std::vector<std::string> blurs;
    for (const auto& t : policy.effective_transforms()) {
        if (t == "gaussian-blur" || t == "median-blur" || t == "bilateral-blur") {
            blurs.push_back(t);  // at most one blur per draw, chosen below
            continue;
        }
        const bool apply = u01(rng) < policy.apply_probability;
        if (t == "hflip") {
            if (apply) detail::apply_geometric(out, [](const Image& im) { return detail::flip_horizontal(im); });
        } else if (t == "vflip") {
            if (apply) detail::apply_geometric(out, [](const Image& im) { return detail::flip_vertical(im); });
        } else if (t == "crop") {
            const double scale = policy.crop_scale_min + (1.0 - policy.crop_scale_min) * u01(rng);
            const int ch = std::max(2, static_cast<int>(std::lround(scale * rows)));
            const int cw = std::max(2, static_cast<int>(std::lround(scale * cols)));
            const int r0 = static_cast<int>(u01(rng) * (rows - ch + 1));
            const int c0 = static_cast<int>(u01(rng) * (cols - cw + 1));
            if (apply)
                detail::apply_geometric(out, [&](const Image& im) {
                    Image crop(ch, cw);
                    for (int r = 0; r < ch; ++r)
                        for (int c = 0; c < cw; ++c) crop.at(r, c) = im.at(r0 + r, c0 + c);
                    return resize_bilinear(crop, rows, cols);
                });
        } else if (t == "affine") {
            const double theta = policy.affine_max_rotation_deg * (2.0 * u01(rng) - 1.0) * M_PI / 180.0;
            const double scale =
                policy.affine_scale_min + (policy.affine_scale_max - policy.affine_scale_min) * u01(rng);
            const double tr = policy.affine_max_translate_frac * rows * (2.0 * u01(rng) - 1.0);
            const double tc = policy.affine_max_translate_frac * cols * (2.0 * u01(rng) - 1.0);
            if (apply)
                detail::apply_geometric(out, [&](const Image& im) {
                    Image res(rows, cols);
                    const double cr = 0.5 * (rows - 1), cc = 0.5 * (cols - 1);
                    // inverse map: rotate by -theta, unscale, untranslate
                    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
                    for (int r = 0; r < rows; ++r)
                        for (int c = 0; c < cols; ++c) {
                            const double yr = r - cr - tr, yc = c - cc - tc;
                            const double sr = (cos_t * yr + sin_t * yc) / scale + cr;
                            const double sc = (-sin_t * yr + cos_t * yc) / scale + cc;
                            res.at(r, c) = sample_bilinear(im, sr, sc);
                        }
                    return res;
                });
        } else if (t == "elastic") {
            Image dr(rows, cols), dc(rows, cols);
            for (auto& v : dr.v) v = policy.elastic_amplitude * (2.0 * u01(rng) - 1.0);
            for (auto& v : dc.v) v = policy.elastic_amplitude * (2.0 * u01(rng) - 1.0);
            if (apply) {
                dr = gaussian_blur(dr, policy.elastic_sigma);
                dc = gaussian_blur(dc, policy.elastic_sigma);
                detail::apply_geometric(out, [&](const Image& im) { return detail::warp(im, dr, dc); });
            }
        } else if (t == "gamma") {
            const double g = policy.gamma_min + (policy.gamma_max - policy.gamma_min) * u01(rng);
            if (apply)
                for (auto& v : out.image.v) v = std::pow(clamp01(v), g);
        } else if (t == "gaussian-noise") {
            const double sigma = policy.noise_sigma_max * u01(rng);
            std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1e-12);
            if (apply)
                for (auto& v : out.image.v) v = clamp01(v + noise(rng));
        }
    }
    if (!blurs.empty() && u01(rng) < policy.apply_probability) {
        const auto& pick = blurs[static_cast<std::size_t>(u01(rng) * blurs.size()) % blurs.size()];
        if (pick == "gaussian-blur") {
            const double sigma = policy.blur_sigma_min + (policy.blur_sigma_max - policy.blur_sigma_min) * u01(rng);
            out.image = gaussian_blur(out.image, sigma);
        } else if (pick == "median-blur") {
            out.image = median_filter(out.image, policy.median_radius);
        } else {
            out.image = bilateral_filter(out.image, policy.bilateral_sigma_space, policy.bilateral_sigma_range);
        }
    }
    detail::rethreshold(out);
    return {std::move(out)};
}

inline std::vector<AlignedSample> augment(const AlignedSample& sample, const AugmentationPolicy& policy) {
    std::mt19937_64 rng(policy.seed);
    return augment(sample, policy, rng);
}

}  // namespace octseg
