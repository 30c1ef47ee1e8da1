#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "octseg/common.hpp"
#include "octseg/metrics.hpp"

namespace octseg {

namespace detail {

struct SvgCanvas {
    std::ofstream out;
    explicit SvgCanvas(const std::string& path, int w, int h) : out(path) {
        if (!out) throw RuntimeFailure("cannot open for writing: " + path);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
            << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
            << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* stroke = "black", double width = 1.0) {
        out << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2 << "\" stroke=\""
            << stroke << "\" stroke-width=\"" << width << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const char* fill, const char* stroke = "black") {
        out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h << "\" fill=\"" << fill
            << "\" stroke=\"" << stroke << "\"/>\n";
    }
    void circle(double cx, double cy, double r, const char* fill) {
        out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\" fill=\"" << fill << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 12, const char* anchor = "middle") {
        out << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
            << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
    }
    void close() { out << "</svg>\n"; }
};

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace detail

// One box (min, q1, median, q3, max whiskers) per labeled group.
inline void write_boxplot_svg(const std::string& path, const std::vector<std::string>& labels,
                              const std::vector<std::vector<double>>& groups, const std::string& title,
                              const std::string& y_label) {
    if (labels.size() != groups.size() || groups.empty()) throw ValidationError("boxplot: labels/groups mismatch");
    for (const auto& g : groups)
        if (g.empty()) throw ValidationError("boxplot: empty group");
    const int W = 160 * static_cast<int>(groups.size()) + 100, H = 420;
    const double top = 50, bottom = H - 50, left = 70;
    double vmin = groups[0][0], vmax = groups[0][0];
    for (const auto& g : groups)
        for (double v : g) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    if (vmax - vmin < 1e-12) vmax = vmin + 1.0;
    const double pad = 0.05 * (vmax - vmin);
    vmin -= pad;
    vmax += pad;
    auto ypix = [&](double v) { return bottom - (v - vmin) / (vmax - vmin) * (bottom - top); };

    detail::SvgCanvas svg(path, W, H);
    svg.text(W / 2.0, 25, title, 15);
    svg.line(left, top, left, bottom);
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = vmin + (vmax - vmin) * tick / 4.0;
        svg.line(left - 4, ypix(v), left, ypix(v));
        svg.text(left - 8, ypix(v) + 4, detail::format_value(v), 11, "end");
    }
    svg.text(18, (top + bottom) / 2.0, y_label, 12);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        std::vector<double> v = groups[i];
        std::sort(v.begin(), v.end());
        const double q1 = percentile(v, 25.0), q2 = percentile(v, 50.0), q3 = percentile(v, 75.0);
        const double lo = v.front(), hi = v.back();
        const double cx = left + 60 + 160.0 * static_cast<double>(i);
        const double bw = 70;
        svg.line(cx, ypix(hi), cx, ypix(q3));
        svg.line(cx, ypix(q1), cx, ypix(lo));
        svg.line(cx - bw / 4, ypix(hi), cx + bw / 4, ypix(hi));
        svg.line(cx - bw / 4, ypix(lo), cx + bw / 4, ypix(lo));
        svg.rect(cx - bw / 2, ypix(q3), bw, ypix(q1) - ypix(q3), "#cfe2f3");
        svg.line(cx - bw / 2, ypix(q2), cx + bw / 2, ypix(q2), "black", 2.0);
        svg.text(cx, bottom + 22, labels[i], 13);
    }
    svg.close();
}

// Per-dataset worst-image pairing: each line joins the HD of the argmax image
// under the WITHOUT baseline to the same image's HD under the WITH baseline.
inline void write_pairing_plot_svg(const std::string& path, const std::vector<MaxErrorPair>& pairs,
                                   const std::string& label_without, const std::string& label_with,
                                   const std::string& title) {
    if (pairs.empty()) throw ValidationError("pairing plot: no pairs");
    const int W = 460, H = 420;
    const double top = 50, bottom = H - 60, x0 = 140, x1 = 320;
    double vmin = pairs[0].hd_with, vmax = pairs[0].hd_without;
    for (const auto& p : pairs) {
        vmin = std::min({vmin, p.hd_without, p.hd_with});
        vmax = std::max({vmax, p.hd_without, p.hd_with});
    }
    if (vmax - vmin < 1e-12) vmax = vmin + 1.0;
    const double pad = 0.05 * (vmax - vmin);
    vmin -= pad;
    vmax += pad;
    auto ypix = [&](double v) { return bottom - (v - vmin) / (vmax - vmin) * (bottom - top); };

    detail::SvgCanvas svg(path, W, H);
    svg.text(W / 2.0, 25, title, 15);
    svg.line(70, top, 70, bottom);
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = vmin + (vmax - vmin) * tick / 4.0;
        svg.line(66, ypix(v), 70, ypix(v));
        svg.text(62, ypix(v) + 4, detail::format_value(v), 11, "end");
    }
    for (const auto& p : pairs) {
        svg.line(x0, ypix(p.hd_without), x1, ypix(p.hd_with), "#888888");
        svg.circle(x0, ypix(p.hd_without), 4, "#cc0000");
        svg.circle(x1, ypix(p.hd_with), 4, "#0044cc");
    }
    svg.text(x0, bottom + 24, label_without, 13);
    svg.text(x1, bottom + 24, label_with, 13);
    svg.text(18, (top + bottom) / 2.0, "HD (um)", 12);
    svg.close();
}

}  // namespace octseg
