#pragma once

#include <stdexcept>
#include <vector>

#include "pfl/rng.hpp"
#include "pfl/vec.hpp"

namespace pfl {

// Uniform m-subset of {0..n-1}, selection sampling (Knuth Algorithm S).
// Output is strictly increasing; every C(n,m) subset is equally likely.
inline std::vector<int> sample_without_replacement(int n, int m, RngStream& rng) {
    if (m <= 0 || m > n) {
        throw std::invalid_argument("sample_without_replacement: need 1 <= m <= n");
    }
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(m));
    int chosen = 0;
    for (int i = 0; i < n && chosen < m; ++i) {
        const double p = static_cast<double>(m - chosen) / static_cast<double>(n - i);
        if (rng.uniform() < p) {
            out.push_back(i);
            ++chosen;
        }
    }
    return out;
}

// Monte-Carlo estimate of E || (1/m) sum_{i in A} a_i - mu ||^2 over uniform
// m-subsets A. Diagnostics compare this against the finite-population
// correction sigma^2 (1-r) / (r (n-1)).
inline double subset_mean_variance(const std::vector<Vec>& values, int m, long trials,
                                   RngStream& rng) {
    if (values.empty()) throw std::invalid_argument("subset_mean_variance: empty population");
    if (trials <= 0) throw std::invalid_argument("subset_mean_variance: trials must be positive");
    const int n = static_cast<int>(values.size());
    if (m <= 0 || m > n) throw std::invalid_argument("subset_mean_variance: need 1 <= m <= n");

    const std::size_t d = values[0].size();
    Vec mu = zeros(d);
    for (const Vec& v : values) axpy(1.0 / n, v, mu);

    double acc = 0.0;
    Vec mean(d);
    for (long t = 0; t < trials; ++t) {
        const std::vector<int> subset = sample_without_replacement(n, m, rng);
        std::fill(mean.begin(), mean.end(), 0.0);
        for (int idx : subset) axpy(1.0 / m, values[static_cast<std::size_t>(idx)], mean);
        acc += sq_dist(mean, mu);
    }
    return acc / static_cast<double>(trials);
}

}  // namespace pfl
