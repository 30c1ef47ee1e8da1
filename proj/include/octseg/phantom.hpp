#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "octseg/common.hpp"
#include "octseg/dataio.hpp"
#include "octseg/types.hpp"

namespace octseg {

enum class InterfaceKind { QuadraticArc, PiecewiseFlatLimbal, LinearTilt };

struct ArtifactBand {
    double center_column = 0.0;
    double width = 4.0;  // Gaussian sigma, pixels
    double amplitude = 0.8;
};

struct PhantomSpec {
    int width = 256;
    int height = 1024;
    InterfaceKind interface_kind = InterfaceKind::QuadraticArc;
    // quadratic-arc: {apex_row, apex_col, curvature}, y = apex_row + curvature*(x-apex_col)^2
    // piecewise-flat-limbal: {flat_row, break_col, slope}, flat then linear ramp
    // linear-tilt: {row0, slope}, y = row0 + slope*x
    std::vector<double> interface_params;
    double tissue_base_intensity = 0.55;
    double background_intensity = 0.06;
    double speckle_contrast = 0.5;  // sd of the unit-mean multiplicative speckle
    std::vector<ArtifactBand> artifact_bands;
    double snr_dropoff_rate = 0.0;  // per-column exponential decay of tissue intensity
    std::vector<int> saturation_columns;
    std::uint64_t seed = 0;
    double axial_spacing_um = 3.4;
    double lateral_spacing_um = 6.0;
    double band_halfwidth_px = 2.0;
};

namespace detail {

inline double interface_row(const PhantomSpec& spec, int x) {
    const auto& p = spec.interface_params;
    switch (spec.interface_kind) {
        case InterfaceKind::QuadraticArc:
            if (p.size() != 3) throw ValidationError("quadratic-arc needs 3 interface_params");
            return p[0] + p[2] * (x - p[1]) * (x - p[1]);
        case InterfaceKind::PiecewiseFlatLimbal:
            if (p.size() != 3) throw ValidationError("piecewise-flat-limbal needs 3 interface_params");
            return x <= p[1] ? p[0] : p[0] + p[2] * (x - p[1]);
        case InterfaceKind::LinearTilt:
            if (p.size() != 2) throw ValidationError("linear-tilt needs 2 interface_params");
            return p[0] + p[1] * x;
    }
    throw ValidationError("unknown interface kind");
}

}  // namespace detail

inline void validate(const PhantomSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw ValidationError("phantom: non-positive dimensions");
    if (!(spec.tissue_base_intensity > spec.background_intensity))
        throw ValidationError("phantom: tissue_base_intensity must exceed background_intensity");
    if (spec.tissue_base_intensity < 0.0 || spec.tissue_base_intensity > 1.0 || spec.background_intensity < 0.0 ||
        spec.background_intensity > 1.0)
        throw ValidationError("phantom: intensities must lie in [0,1]");
    if (spec.speckle_contrast < 0.0) throw ValidationError("phantom: speckle_contrast must be >= 0");
    if (spec.snr_dropoff_rate < 0.0) throw ValidationError("phantom: snr_dropoff_rate must be >= 0");
    for (int x = 0; x < spec.width; ++x) {
        const double y = detail::interface_row(spec, x);
        if (!(y >= 0.0 && y <= spec.height - 1.0))
            throw ValidationError("phantom: interface leaves image at column " + std::to_string(x));
    }
    for (int c : spec.saturation_columns)
        if (c < 0 || c >= spec.width) throw ValidationError("phantom: saturation column out of range");
}

// Synthesizes one B-scan plus the exact interface it was drawn from. Below the
// interface: tissue intensity x unit-mean gamma speckle x lateral SNR decay
// away from the interface apex. Above: background plus additive bright bands
// with Gaussian lateral profile. Saturation columns are forced to 1.0 down to
// and including the interface row. Everything clips to [0,1].
inline std::pair<BScan, AnnotationCurve> generate_phantom(const PhantomSpec& spec) {
    validate(spec);
    AnnotationCurve ann;
    ann.band_halfwidth_px = spec.band_halfwidth_px;
    ann.rows.resize(spec.width);
    std::vector<double> exact(spec.width);
    int x_apex = 0;
    for (int x = 0; x < spec.width; ++x) {
        exact[x] = detail::interface_row(spec, x);
        ann.rows[x] = static_cast<int>(std::lround(exact[x]));
        if (exact[x] < exact[x_apex]) x_apex = x;
    }

    BScan scan;
    scan.axial_spacing_um = spec.axial_spacing_um;
    scan.lateral_spacing_um = spec.lateral_spacing_um;
    scan.pixels = Image(spec.height, spec.width);
    std::mt19937_64 rng(spec.seed);
    const double c2 = spec.speckle_contrast * spec.speckle_contrast;
    std::gamma_distribution<double> speckle(c2 > 0.0 ? 1.0 / c2 : 1.0, c2);
    for (int x = 0; x < spec.width; ++x) {
        const double falloff = std::exp(-spec.snr_dropoff_rate * std::abs(x - x_apex));
        double band_sum = 0.0;
        for (const auto& b : spec.artifact_bands)
            band_sum += b.amplitude * std::exp(-0.5 * (x - b.center_column) * (x - b.center_column) / (b.width * b.width));
        for (int r = 0; r < spec.height; ++r) {
            double v;
            if (r >= ann.rows[x]) {
                const double s = c2 > 0.0 ? speckle(rng) : 1.0;
                v = spec.tissue_base_intensity * s * falloff;
            } else {
                v = spec.background_intensity + band_sum;
            }
            scan.pixels.at(r, x) = clamp01(v);
        }
    }
    for (int x : spec.saturation_columns)
        for (int r = 0; r <= ann.rows[x]; ++r) scan.pixels.at(r, x) = 1.0;
    return {std::move(scan), std::move(ann)};
}

// Writes every phantom (image + annotation) under out_dir and a manifest
// assigning the first train_count specs to the train split, the rest to test.
inline DatasetManifest generate_corpus(const std::vector<PhantomSpec>& specs, const std::filesystem::path& out_dir,
                                       int train_count) {
    if (train_count < 0 || train_count > static_cast<int>(specs.size()))
        throw ValidationError("generate_corpus: train_count out of range");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw RuntimeFailure("generate_corpus: cannot create " + out_dir.string());
    DatasetManifest manifest;
    manifest.root = out_dir;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "phantom_%03zu", i);
        auto [scan, ann] = generate_phantom(specs[i]);
        scan.id = id;
        ManifestEntry entry;
        entry.id = id;
        entry.image_path = std::string(id) + ".png";
        entry.annotation_path = std::string(id) + ".json";
        entry.split = static_cast<int>(i) < train_count ? "train" : "test";
        write_png16((out_dir / entry.image_path).string(), scan.pixels);
        write_annotation_json((out_dir / entry.annotation_path).string(), entry.id, ann);
        manifest.entries.push_back(std::move(entry));
    }
    write_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace octseg
