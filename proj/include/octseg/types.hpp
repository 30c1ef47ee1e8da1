#pragma once

#include <string>
#include <vector>

#include "octseg/common.hpp"

namespace octseg {

// A single grayscale OCT cross-section. Intensities live in [0,1].
struct BScan {
    Image pixels;
    double axial_spacing_um = 1.0;
    double lateral_spacing_um = 1.0;
    std::string id;

    int height() const { return pixels.rows; }
    int width() const { return pixels.cols; }

    void validate() const {
        if (axial_spacing_um <= 0.0 || lateral_spacing_um <= 0.0)
            throw ValidationError("BScan " + id + ": pixel spacings must be positive");
        for (double p : pixels.v)
            if (!std::isfinite(p) || p < 0.0 || p > 1.0)
                throw ValidationError("BScan " + id + ": intensities must be finite and within [0,1]");
    }
};

// Grader-style ground truth: one integer interface row per column.
struct AnnotationCurve {
    std::vector<int> rows;
    double band_halfwidth_px = 2.0;

    int width() const { return static_cast<int>(rows.size()); }

    void validate(int height) const {
        for (int r : rows)
            if (r < 0 || r >= height)
                throw ValidationError("AnnotationCurve: row " + std::to_string(r) + " outside [0," +
                                      std::to_string(height - 1) + "]");
    }
};

// Real-valued fitted interface position per column.
struct InterfaceCurve {
    std::vector<double> rows;
    double fit_fraction = 0.1;

    int width() const { return static_cast<int>(rows.size()); }
};

// Intensity image with everything strictly above the interface zeroed.
struct PreSegImage {
    Image pixels;
    std::string source_id;
};

// Binary per-pixel weighting: 1 marks the high-penalty background above the
// down-shifted annotation, 0 the protected foreground at and below it.
struct WeightMask {
    ByteMask pixels;
    int shift_px = 50;
};

// Two-valued segmentation: 1 = interface and everything below, 0 = above.
struct BinaryMask {
    ByteMask pixels;
};

// A fixed-width vertical slice of a B-scan, positioned by its leftmost column.
struct Tile {
    Image pixels;
    std::string source_id;
    int column_offset = 0;
};

}  // namespace octseg
