#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <png.h>
#include <json.hpp>

#include "octseg/common.hpp"
#include "octseg/types.hpp"

namespace octseg {

struct ManifestEntry {
    std::string id;
    std::string image_path;       // relative to the manifest directory
    std::string annotation_path;  // relative to the manifest directory
    std::string split;            // "train" or "test"
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path root;  // directory the relative paths resolve against

    std::filesystem::path image_file(const ManifestEntry& e) const { return root / e.image_path; }
    std::filesystem::path annotation_file(const ManifestEntry& e) const { return root / e.annotation_path; }
};

// ---------------------------------------------------------------------------
// PNG I/O. Images are 16-bit grayscale (intensity x 65535, rounded); masks are
// 8-bit {0,255}.

namespace detail {

struct PngFile {
    std::FILE* fp = nullptr;
    explicit PngFile(const std::string& path, const char* mode) : fp(std::fopen(path.c_str(), mode)) {}
    ~PngFile() {
        if (fp) std::fclose(fp);
    }
    PngFile(const PngFile&) = delete;
    PngFile& operator=(const PngFile&) = delete;
};

}  // namespace detail

inline void write_png16(const std::string& path, const Image& img) {
    detail::PngFile file(path, "wb");
    if (!file.fp) throw RuntimeFailure("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("libpng write failure: " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(img.cols) * 2);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const auto u = static_cast<std::uint16_t>(std::lround(clamp01(img.at(r, c)) * 65535.0));
            row[2 * c] = static_cast<png_byte>(u >> 8);  // network byte order
            row[2 * c + 1] = static_cast<png_byte>(u & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image read_png16(const std::string& path) {
    detail::PngFile file(path, "rb");
    if (!file.fp) throw RuntimeFailure("cannot open for reading: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    Image img;
    std::vector<png_byte> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("libpng read failure: " + path);
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("expected 16-bit grayscale PNG: " + path);
    }
    img = Image(static_cast<int>(png_get_image_height(png, info)), static_cast<int>(png_get_image_width(png, info)));
    row.resize(static_cast<std::size_t>(img.cols) * 2);
    for (int r = 0; r < img.rows; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < img.cols; ++c) {
            const std::uint16_t u = static_cast<std::uint16_t>((row[2 * c] << 8) | row[2 * c + 1]);
            img.at(r, c) = static_cast<double>(u) / 65535.0;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png8(const std::string& path, const ByteMask& mask) {
    detail::PngFile file(path, "wb");
    if (!file.fp) throw RuntimeFailure("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("libpng write failure: " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(mask.cols), static_cast<png_uint_32>(mask.rows), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(mask.cols));
    for (int r = 0; r < mask.rows; ++r) {
        for (int c = 0; c < mask.cols; ++c) row[c] = mask.at(r, c) ? 255 : 0;
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline ByteMask read_png8(const std::string& path) {
    detail::PngFile file(path, "rb");
    if (!file.fp) throw RuntimeFailure("cannot open for reading: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    ByteMask mask;
    std::vector<png_byte> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("libpng read failure: " + path);
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("expected 8-bit grayscale PNG: " + path);
    }
    mask = ByteMask(static_cast<int>(png_get_image_height(png, info)), static_cast<int>(png_get_image_width(png, info)));
    row.resize(static_cast<std::size_t>(mask.cols));
    for (int r = 0; r < mask.rows; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < mask.cols; ++c) mask.at(r, c) = row[c] >= 128 ? 1 : 0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return mask;
}

// Grayscale image with the curve drawn in red, for visual inspection.
inline void write_overlay_png(const std::string& path, const Image& img, const InterfaceCurve& curve) {
    if (curve.width() != img.cols) throw ValidationError("write_overlay_png: curve width mismatch");
    detail::PngFile file(path, "wb");
    if (!file.fp) throw RuntimeFailure("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("libpng write failure: " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<int> contour(img.cols);
    for (int c = 0; c < img.cols; ++c)
        contour[c] = static_cast<int>(std::lround(std::clamp(curve.rows[c], 0.0, static_cast<double>(img.rows - 1))));
    std::vector<png_byte> row(static_cast<std::size_t>(img.cols) * 3);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const auto g = static_cast<png_byte>(std::lround(clamp01(img.at(r, c)) * 255.0));
            if (contour[c] == r) {
                row[3 * c] = 255;
                row[3 * c + 1] = 0;
                row[3 * c + 2] = 0;
            } else {
                row[3 * c] = row[3 * c + 1] = row[3 * c + 2] = g;
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------------------
// JSON sidecar formats.

inline void write_annotation_json(const std::string& path, const std::string& id, const AnnotationCurve& ann) {
    nlohmann::json j;
    j["id"] = id;
    j["rows"] = ann.rows;
    j["band_halfwidth_px"] = ann.band_halfwidth_px;
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline AnnotationCurve read_annotation_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot open for reading: " + path);
    nlohmann::json j;
    in >> j;
    AnnotationCurve ann;
    ann.rows = j.at("rows").get<std::vector<int>>();
    ann.band_halfwidth_px = j.at("band_halfwidth_px").get<double>();
    return ann;
}

// Missing columns (NaN) are stored as JSON null.
inline void write_curve_json(const std::string& path, const std::string& id, const InterfaceCurve& curve) {
    nlohmann::json rows = nlohmann::json::array();
    for (double r : curve.rows) {
        if (std::isfinite(r))
            rows.push_back(r);
        else
            rows.push_back(nullptr);
    }
    nlohmann::json j;
    j["id"] = id;
    j["rows"] = std::move(rows);
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline InterfaceCurve read_curve_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot open for reading: " + path);
    nlohmann::json j;
    in >> j;
    InterfaceCurve curve;
    for (const auto& r : j.at("rows")) {
        if (r.is_null())
            curve.rows.push_back(std::numeric_limits<double>::quiet_NaN());
        else
            curve.rows.push_back(r.get<double>());
    }
    return curve;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : manifest.entries)
        entries.push_back({{"id", e.id}, {"image", e.image_path}, {"annotation", e.annotation_path}, {"split", e.split}});
    nlohmann::json j;
    j["entries"] = entries;
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot open manifest: " + path.string());
    nlohmann::json j;
    in >> j;
    DatasetManifest manifest;
    manifest.root = path.parent_path();
    std::vector<std::string> seen;
    for (const auto& e : j.at("entries")) {
        ManifestEntry entry{e.at("id").get<std::string>(), e.at("image").get<std::string>(),
                            e.at("annotation").get<std::string>(), e.at("split").get<std::string>()};
        if (entry.split != "train" && entry.split != "test")
            throw ValidationError("manifest entry " + entry.id + ": split must be train or test");
        if (std::find(seen.begin(), seen.end(), entry.id) != seen.end())
            throw ValidationError("manifest: duplicate id " + entry.id);
        seen.push_back(entry.id);
        if (!std::filesystem::exists(manifest.image_file(entry)))
            throw RuntimeFailure("manifest references missing image: " + manifest.image_file(entry).string());
        if (!std::filesystem::exists(manifest.annotation_file(entry)))
            throw RuntimeFailure("manifest references missing annotation: " + manifest.annotation_file(entry).string());
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// Width-wise tiling.

// Cuts the scan into tiles of the given width covering every column. When the
// width is not a multiple, the final tile is right-aligned and overlaps its
// neighbour instead of padding with synthetic border pixels.
inline std::vector<Tile> slice_widthwise(const BScan& scan, int tile_width) {
    if (tile_width <= 0) throw ValidationError("slice_widthwise: tile_width must be positive");
    if (scan.width() < tile_width)
        throw ValidationError("slice_widthwise: scan " + scan.id + " narrower than tile width " +
                              std::to_string(tile_width));
    const int n = (scan.width() + tile_width - 1) / tile_width;
    std::vector<Tile> tiles;
    tiles.reserve(n);
    for (int i = 0; i < n; ++i) {
        int offset = i * tile_width;
        if (offset + tile_width > scan.width()) offset = scan.width() - tile_width;
        Tile t;
        t.source_id = scan.id;
        t.column_offset = offset;
        t.pixels = Image(scan.height(), tile_width);
        for (int r = 0; r < scan.height(); ++r)
            for (int c = 0; c < tile_width; ++c) t.pixels.at(r, c) = scan.pixels.at(r, offset + c);
        tiles.push_back(std::move(t));
    }
    return tiles;
}

enum class BlendMode { OverwriteLeftToRight };

// Inverse of slice_widthwise: in overlap regions the later (right) tile wins,
// so slice -> reassemble is the identity.
inline Image reassemble(const std::vector<Tile>& tiles, int full_width, BlendMode = BlendMode::OverwriteLeftToRight) {
    if (tiles.empty()) throw ValidationError("reassemble: no tiles");
    std::vector<const Tile*> ordered;
    ordered.reserve(tiles.size());
    for (const auto& t : tiles) ordered.push_back(&t);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Tile* a, const Tile* b) { return a->column_offset < b->column_offset; });
    const int rows = ordered.front()->pixels.rows;
    int covered = 0;
    for (const Tile* t : ordered) {
        if (t->pixels.rows != rows) throw ValidationError("reassemble: tile heights differ");
        if (t->column_offset > covered)
            throw ValidationError("reassemble: coverage gap at column " + std::to_string(covered));
        covered = std::max(covered, t->column_offset + t->pixels.cols);
    }
    if (covered != full_width)
        throw ValidationError("reassemble: tiles cover " + std::to_string(covered) + " columns, expected " +
                              std::to_string(full_width));
    Image out(rows, full_width);
    for (const Tile* t : ordered)
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < t->pixels.cols; ++c) out.at(r, t->column_offset + c) = t->pixels.at(r, c);
    return out;
}

// ---------------------------------------------------------------------------
// Train/validation splitting.

// Deterministic partition of [0,n): |validation| = round(fraction * n).
inline std::pair<std::vector<int>, std::vector<int>> split_train_validation(int n, double fraction_validation,
                                                                            std::uint64_t seed) {
    if (n < 2) throw ValidationError("split_train_validation: need at least 2 items");
    if (!(fraction_validation > 0.0 && fraction_validation < 1.0))
        throw ValidationError("split_train_validation: fraction must lie in (0,1)");
    const int n_val = static_cast<int>(std::llround(fraction_validation * n));
    if (n_val < 1) throw ValidationError("split_train_validation: validation split is empty");
    if (n_val >= n) throw ValidationError("split_train_validation: train split is empty");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> validation(idx.begin(), idx.begin() + n_val);
    std::vector<int> train(idx.begin() + n_val, idx.end());
    std::sort(train.begin(), train.end());
    std::sort(validation.begin(), validation.end());
    return {train, validation};
}

inline std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split_train_validation(
    const std::vector<ManifestEntry>& entries, double fraction_validation, std::uint64_t seed) {
    auto [train_idx, val_idx] = split_train_validation(static_cast<int>(entries.size()), fraction_validation, seed);
    std::vector<ManifestEntry> train, validation;
    for (int i : train_idx) train.push_back(entries[i]);
    for (int i : val_idx) validation.push_back(entries[i]);
    return {train, validation};
}

}  // namespace octseg
