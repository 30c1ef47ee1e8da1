#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "octseg/common.hpp"
#include "octseg/types.hpp"

namespace octseg {

// Mean absolute per-column boundary difference in pixels; both curves floored
// to whole rows first.
inline double madlbp(const InterfaceCurve& g, const InterfaceCurve& s) {
    if (g.width() != s.width()) throw ValidationError("madlbp: width mismatch");
    if (g.width() == 0) throw ValidationError("madlbp: empty curves");
    double sum = 0.0;
    for (int x = 0; x < g.width(); ++x) sum += std::abs(std::floor(g.rows[x]) - std::floor(s.rows[x]));
    return sum / static_cast<double>(g.width());
}

// Symmetric Hausdorff distance in microns between the two fitted boundaries,
// each curve taken as the point set {(x * lateral_um, y(x) * axial_um)}.
// Exact all-pairs computation.
inline double hausdorff(const InterfaceCurve& g, const InterfaceCurve& s, double axial_um, double lateral_um) {
    if (g.width() != s.width()) throw ValidationError("hausdorff: width mismatch");
    if (g.width() == 0) throw ValidationError("hausdorff: empty curves");
    if (!(axial_um > 0.0 && lateral_um > 0.0)) throw ValidationError("hausdorff: spacings must be > 0");
    const int n = g.width();
    auto directed = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                const double dx = (i - j) * lateral_um;
                const double dy = (a[i] - b[j]) * axial_um;
                best = std::min(best, dx * dx + dy * dy);
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::sqrt(std::max(directed(g.rows, s.rows), directed(s.rows, g.rows)));
}

// ---------------------------------------------------------------------------
// Reports.

struct ImageMetrics {
    std::string id;
    std::string dataset;
    double madlbp_px = 0.0;
    double hd_um = 0.0;
    bool failed = false;
};

struct MetricAggregate {
    double mean = 0.0, median = 0.0, max = 0.0;
    std::string argmax_id;
    int n = 0;
};

struct MetricsReport {
    std::string baseline;  // TWOPS | TWPS | DLWOPS | DLWPS
    std::vector<ImageMetrics> rows;

    int failure_count() const {
        int n = 0;
        for (const auto& r : rows) n += r.failed ? 1 : 0;
        return n;
    }
};

inline MetricAggregate aggregate(const MetricsReport& report, double ImageMetrics::* field) {
    MetricAggregate agg;
    std::vector<double> values;
    for (const auto& r : report.rows) {
        if (r.failed) continue;
        const double v = r.*field;
        values.push_back(v);
        agg.mean += v;
        if (agg.n == 0 || v > agg.max) {
            agg.max = v;
            agg.argmax_id = r.id;
        }
        ++agg.n;
    }
    if (agg.n == 0) throw ValidationError("aggregate: every image failed for baseline " + report.baseline);
    agg.mean /= agg.n;
    agg.median = median(values);
    return agg;
}

inline void write_report_csv(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open for writing: " + path);
    out << "id,dataset,madlbp_px,hd_um,failed\n";
    out.precision(12);
    for (const auto& r : report.rows) {
        out << r.id << "," << r.dataset << ",";
        if (r.failed)
            out << ",,1\n";
        else
            out << r.madlbp_px << "," << r.hd_um << ",0\n";
    }
}

inline MetricsReport read_report_csv(const std::string& path, const std::string& baseline) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot open report: " + path);
    MetricsReport report;
    report.baseline = baseline;
    std::string line;
    std::getline(in, line);
    if (line != "id,dataset,madlbp_px,hd_um,failed") throw RuntimeFailure("unexpected report header in " + path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ImageMetrics row;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (fields.size() != 5) throw RuntimeFailure("malformed report row in " + path + ": " + line);
        row.id = fields[0];
        row.dataset = fields[1];
        row.failed = fields[4] == "1";
        if (!row.failed) {
            row.madlbp_px = std::stod(fields[2]);
            row.hd_um = std::stod(fields[3]);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Max-error pairing: per dataset, the image with the worst HD under the
// WITHOUT-pre-segmentation baseline, paired with that image's HD under the
// WITH-pre-segmentation baseline.

struct MaxErrorPair {
    std::string dataset;
    std::string image_id;
    double hd_without = 0.0;
    double hd_with = 0.0;
};

inline std::vector<MaxErrorPair> max_error_pairing(const MetricsReport& without, const MetricsReport& with) {
    if (without.rows.size() != with.rows.size()) throw ValidationError("max_error_pairing: report size mismatch");
    std::map<std::string, const ImageMetrics*> with_by_id;
    for (const auto& r : with.rows) with_by_id[r.id] = &r;
    std::map<std::string, const ImageMetrics*> worst;  // dataset -> argmax row
    std::vector<std::string> dataset_order;
    for (const auto& r : without.rows) {
        if (!with_by_id.count(r.id)) throw ValidationError("max_error_pairing: id " + r.id + " missing from WITH report");
        if (r.failed) continue;
        auto it = worst.find(r.dataset);
        if (it == worst.end()) {
            worst[r.dataset] = &r;
            dataset_order.push_back(r.dataset);
        } else if (r.hd_um > it->second->hd_um) {
            it->second = &r;
        }
    }
    std::vector<MaxErrorPair> pairs;
    for (const auto& ds : dataset_order) {
        const ImageMetrics* w = worst[ds];
        const ImageMetrics* m = with_by_id[w->id];
        if (m->failed) continue;  // pair undefined when the WITH baseline failed on that image
        pairs.push_back({ds, w->id, w->hd_um, m->hd_um});
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Paired t-test.

namespace detail {

// Continued-fraction evaluation of the regularized incomplete beta I_x(a,b).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 200;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    int n = 0;
};

// Two-sided paired t-test on differences a - b.
inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("paired_t_test: length mismatch");
    const int n = static_cast<int>(a.size());
    if (n < 2) throw ValidationError("paired_t_test: need at least 2 pairs");
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double var = ss / (n - 1);
    if (var <= 0.0) throw ValidationError("paired_t_test: zero variance of differences");
    TTestResult res;
    res.n = n;
    res.t = mean / std::sqrt(var / n);
    const double nu = n - 1;
    // two-sided p: I_{nu/(nu+t^2)}(nu/2, 1/2)
    res.p = detail::incomplete_beta(nu / 2.0, 0.5, nu / (nu + res.t * res.t));
    return res;
}

}  // namespace octseg
