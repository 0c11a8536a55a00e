#include "pfl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pfl {

namespace {
Eigen::VectorXd random_gaussian(int d, RngStream& rng) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    return v;
}

// zero-mean, unit-mean-square weight sequence
std::vector<double> centered_weights(int n, RngStream& rng) {
    std::vector<double> z(static_cast<std::size_t>(n));
    for (double& v : z) v = rng.normal();
    double mean = 0.0;
    for (double v : z) mean += v / n;
    double ms = 0.0;
    for (double& v : z) {
        v -= mean;
        ms += v * v / n;
    }
    if (ms < 1e-30) {  // degenerate draw; fall back to an alternating pattern
        for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = (i % 2 == 0) ? 1.0 : -1.0;
        ms = 1.0;
        if (n % 2 == 1) {
            mean = 1.0 / n;
            ms = 0.0;
            for (double& v : z) {
                v -= mean;
                ms += v * v / n;
            }
        }
    }
    const double inv = 1.0 / std::sqrt(ms);
    for (double& v : z) v *= inv;
    return z;
}
}  // namespace

SyntheticFederation make_synthetic_federation(int n, int d, const SyntheticSpec& spec,
                                              RngStream& rng) {
    if (n < 2) throw std::invalid_argument("make_synthetic_federation: n >= 2 required");
    if (d < 1) throw std::invalid_argument("make_synthetic_federation: d >= 1 required");

    // shared base: A0 = Q diag(lambda) Q', b0 random
    Eigen::MatrixXd G(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::VectorXd lambda(d);
    for (int i = 0; i < d; ++i) {
        const double lo = spec.convex ? 0.5 : -0.5;
        lambda[i] = spec.base_scale * (lo + (1.0 - lo) * rng.uniform());
    }
    Eigen::MatrixXd A0 = Q * lambda.asDiagonal() * Q.transpose();
    A0 = 0.5 * (A0 + A0.transpose());
    Eigen::VectorXd b0 = spec.base_scale * random_gaussian(d, rng);

    // shared perturbation directions, orthonormal when d >= 2
    Eigen::VectorXd u = random_gaussian(d, rng).normalized();
    Eigen::VectorXd v = random_gaussian(d, rng);
    if (d >= 2) {
        v -= u * u.dot(v);
        if (v.norm() < 1e-12) v = random_gaussian(d, rng) - u * u.dot(v);
    }
    v.normalize();

    const std::vector<double> s = centered_weights(n, rng);
    const std::vector<double> t = centered_weights(n, rng);

    double max_abs_s = 0.0;
    for (double x : s) max_abs_s = std::max(max_abs_s, std::abs(x));

    if (spec.convex) {
        // keep every A_i positive definite under the rank-1 perturbation
        const double need = spec.hess_spread * max_abs_s + 0.05 * spec.base_scale;
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A0).eigenvalues().minCoeff();
        if (lmin < need) A0 += (need - lmin) * Eigen::MatrixXd::Identity(d, d);
    }

    SyntheticFederation fed;
    fed.hess_spread = spec.hess_spread;
    fed.grad_spread = spec.grad_spread;
    fed.uv_dot = u.dot(v);
    for (int i = 0; i < n; ++i) fed.m_st += s[static_cast<std::size_t>(i)] * t[static_cast<std::size_t>(i)] / n;

    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd Ai = A0 + spec.hess_spread * s[static_cast<std::size_t>(i)] * (u * u.transpose());
        Ai = 0.5 * (Ai + Ai.transpose());
        Eigen::VectorXd bi = b0 + spec.grad_spread * t[static_cast<std::size_t>(i)] * v;
        fed.tasks.push_back(std::make_shared<QuadraticTask>(
            std::move(Ai), std::move(bi), spec.grad_noise_std, spec.hess_noise_std,
            spec.domain_radius, rng.next_u64()));
    }
    return fed;
}

double SyntheticFederation::max_L() const {
    double L = 0.0;
    for (const auto& t : tasks) L = std::max(L, t->constants().L);
    return L;
}

double SyntheticFederation::max_B(double R) const {
    double B = 0.0;
    for (const auto& t : tasks)
        B = std::max(B, t->constants().L * R + t->b().norm());
    return B;
}

std::pair<double, double> estimate_sigma(const LossModel& model,
                                         const std::vector<Vec>& probe_points,
                                         int samples_per_point, RngStream& rng) {
    if (samples_per_point <= 0)
        throw std::invalid_argument("estimate_sigma: samples_per_point must be positive");
    double sg2 = 0.0;
    double sh2 = 0.0;
    const int d = model.dim();
    for (const Vec& w : probe_points) {
        const Vec g_ref = model.exact_grad(w);

        // a fixed random unit probe per point for the HVP deviation
        Vec probe(static_cast<std::size_t>(d));
        for (double& x : probe) x = rng.normal();
        const double pn = norm(probe);
        if (pn > 0) scale(probe, 1.0 / pn);
        const Vec h_ref = model.exact_hvp(w, probe);

        double acc_g = 0.0;
        double acc_h = 0.0;
        for (int s = 0; s < samples_per_point; ++s) {
            const Sample smp = model.draw_sample(rng);
            acc_g += sq_dist(model.grad_sample(smp, w), g_ref);
            acc_h += sq_dist(model.hvp_sample(smp, w, probe), h_ref);
        }
        sg2 = std::max(sg2, acc_g / samples_per_point);
        sh2 = std::max(sh2, acc_h / samples_per_point);
    }
    return {sg2, sh2};
}

}  // namespace pfl
