#pragma once

#include <memory>
#include <vector>

#include "pfl/quadratic.hpp"

namespace pfl {

// Spread knobs for a heterogeneous quadratic federation.
struct SyntheticSpec {
    double hess_spread = 0.0;   // scale of per-user Hessian perturbation
    double grad_spread = 0.0;   // scale of per-user linear-term perturbation
    bool convex = false;        // force all A_i positive definite
    double base_scale = 1.0;    // eigenvalue scale of the shared base A0
    double grad_noise_std = 0.0;
    double hess_noise_std = 0.0;
    double domain_radius = 10.0;
};

// Tasks A_i = A0 + hess_spread * s_i * u u', b_i = b0 + grad_spread * t_i * v
// with zero-mean, unit-mean-square weights s, t and a shared direction pair
// (u, v). The rank-1 structure makes the Assumption-5 heterogeneity
// constants exactly computable:
//   gamma_H^2 = hess_spread^2
//   gamma_G^2(R) = max over the radius-R ball of the dissimilarity quadratic.
struct SyntheticFederation {
    std::vector<std::shared_ptr<QuadraticTask>> tasks;

    double hess_spread = 0.0;
    double grad_spread = 0.0;
    double uv_dot = 0.0;   // u . v
    double m_st = 0.0;     // (1/n) sum s_i t_i

    double gamma_H2() const { return hess_spread * hess_spread; }

    // exact sup over ||w|| <= R of (1/n) sum ||grad f_i - grad f||^2
    double gamma_G2(double R) const {
        const double a = hess_spread, b = grad_spread;
        return a * a * R * R + b * b + 2.0 * std::abs(a * b * uv_dot * m_st) * R;
    }

    double max_L() const;
    double max_B(double R) const;

    std::vector<ModelPtr> as_models() const {
        return std::vector<ModelPtr>(tasks.begin(), tasks.end());
    }
};

SyntheticFederation make_synthetic_federation(int n, int d, const SyntheticSpec& spec,
                                              RngStream& rng);

// Empirical per-sample noise levels: max over probe points of the second
// moment of gradient deviation, and of HVP deviation on random unit probes
// (the latter is a lower bound on the operator-norm quantity).
std::pair<double, double> estimate_sigma(const LossModel& model,
                                         const std::vector<Vec>& probe_points,
                                         int samples_per_point, RngStream& rng);

}  // namespace pfl
