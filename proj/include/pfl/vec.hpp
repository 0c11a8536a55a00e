#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfl {

// Dense parameter vector. All model coordinates and gradient-like
// quantities are plain double sequences; dimension is implicit.
using Vec = std::vector<double>;

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

inline void check_same_dim(const Vec& a, const Vec& b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
}

inline double dot(const Vec& a, const Vec& b) {
    check_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double sq_dist(const Vec& a, const Vec& b) {
    check_same_dim(a, b, "sq_dist");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = a[i] - b[i];
        s += e * e;
    }
    return s;
}

// y += c * x
inline void axpy(double c, const Vec& x, Vec& y) {
    check_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline void scale(Vec& x, double c) {
    for (double& v : x) v *= c;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r = a;
    axpy(1.0, b, r);
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r = a;
    axpy(-1.0, b, r);
    return r;
}

inline Vec scaled(const Vec& a, double c) {
    Vec r = a;
    scale(r, c);
    return r;
}

inline bool all_finite(const Vec& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

inline void ensure_finite(const Vec& a, const char* what) {
    if (!all_finite(a)) {
        throw std::runtime_error(std::string("non-finite value produced by ") + what);
    }
}

}  // namespace pfl
