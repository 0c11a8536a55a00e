#pragma once

#include <functional>

#include "pfl/vec.hpp"

namespace pfl {

constexpr double kDefaultFdStep = 1e-5;

// Central-difference gradient of a scalar field. Per-coordinate error is
// O(h^2) times a third-derivative bound; exact for quadratics up to rounding.
template <typename F>
Vec finite_diff_grad(F&& f, const Vec& w, double h = kDefaultFdStep) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
    Vec g(w.size());
    Vec probe = w;
    for (std::size_t j = 0; j < w.size(); ++j) {
        probe[j] = w[j] + h;
        const double fp = f(probe);
        probe[j] = w[j] - h;
        const double fm = f(probe);
        probe[j] = w[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    ensure_finite(g, "finite_diff_grad");
    return g;
}

}  // namespace pfl
