#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace octseg {

// Thrown for invalid configuration or malformed inputs (CLI exit code 1).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown for failures at run time: missing files, I/O, numerical aborts (CLI exit code 2).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dense row-major 2-D grid. Rows index depth (axial), cols index lateral position.
template <class T>
struct Plane {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Plane() = default;
    Plane(int r, int c, T fill = T{}) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    T& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Plane& o) const { return rows == o.rows && cols == o.cols; }
};

using Image = Plane<double>;
using ByteMask = Plane<std::uint8_t>;

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

template <class T>
void require_same_shape(const Plane<T>& a, const Plane<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw ValidationError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                              std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                              std::to_string(b.cols) + ")");
}

inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of empty set");
    p = std::clamp(p, 0.0, 100.0);
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * (static_cast<double>(values.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

inline double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

}  // namespace octseg
