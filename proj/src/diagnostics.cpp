#include "pfl/diagnostics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "pfl/errors.hpp"

namespace pfl {

void ConstantSet::validate() const {
    if (alpha * L > 1.0 + 1e-12)
        throw std::invalid_argument("ConstantSet: alpha L <= 1 required");
    if (tau < 1 || rounds < 1 || n < 1)
        throw std::invalid_argument("ConstantSet: tau, rounds, n must be >= 1");
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("ConstantSet: r in (0,1] required");
    if (D < 1 || D1 < 1 || D2 < 1)
        throw std::invalid_argument("ConstantSet: batch sizes must be >= 1");
}

DerivedConstants derived_constants(const ConstantSet& c) {
    c.validate();
    DerivedConstants d;
    d.L_F = 4.0 * c.L + c.alpha * c.rho * c.B;

    const double aL = c.alpha * c.L;
    const double grad_term = c.sigma_G * c.sigma_G * (1.0 / c.D1 + aL * aL / c.D);
    const double hess_term = c.sigma_H * c.sigma_H * c.alpha * c.alpha / (4.0 * c.D2);
    d.sigma_F2 = 12.0 * (c.B * c.B + grad_term) * (1.0 + hess_term) - 12.0 * c.B * c.B;
    if (d.sigma_F2 < -1e-9)
        throw NumericError("derived_constants: sigma_F^2 evaluated negative");
    d.sigma_F2 = std::max(0.0, d.sigma_F2);

    d.gamma_F2 = 3.0 * c.B * c.B * c.alpha * c.alpha * c.gamma_H * c.gamma_H +
                 192.0 * c.gamma_G * c.gamma_G;
    d.bias_bound = 2.0 * c.alpha * c.L * c.sigma_G / std::sqrt(static_cast<double>(c.D));

    d.m_fo = c.alpha * c.L * (c.sigma_G / std::sqrt(static_cast<double>(c.D)) + c.B);
    d.s_fo2 = 2.0 * c.sigma_G * c.sigma_G * (1.0 / c.D1 + aL * aL / c.D) +
              2.0 * aL * aL * c.B * c.B;

    d.m_hf = c.alpha * (2.0 * c.L * c.sigma_G / std::sqrt(static_cast<double>(c.D)) +
                        c.L * c.sigma_G / std::sqrt(static_cast<double>(c.D1)) +
                        c.rho * c.delta * c.B * c.B);
    d.s_hf2 = 6.0 * c.sigma_G * c.sigma_G *
                  (2.0 * aL * aL / c.D + 2.0 / c.D1 +
                   c.alpha * c.alpha / (2.0 * c.delta * c.delta * c.D2)) +
              2.0 * std::pow(c.alpha * c.rho * c.delta, 2) * std::pow(c.B, 4);
    return d;
}

std::string bound_table(const std::vector<BoundReport>& reports) {
    std::ostringstream out;
    out << std::left << std::setw(34) << "bound" << std::right << std::setw(14) << "analytic"
        << std::setw(14) << "measured" << std::setw(14) << "margin" << "  status\n";
    for (const BoundReport& r : reports) {
        out << std::left << std::setw(34) << r.name << std::right << std::setw(14)
            << std::setprecision(5) << std::scientific << r.analytic << std::setw(14)
            << r.measured << std::setw(14) << r.margin() << "  "
            << (r.pass() ? "pass" : "FAIL");
        if (r.estimated_constants) out << " (estimated)";
        if (r.low_trial_warning) out << " (low trials)";
        out << '\n';
    }
    return out.str();
}

std::string bounds_json(const std::vector<BoundReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const BoundReport& r : reports) {
        nlohmann::json j;
        j["name"] = r.name;
        j["analytic"] = r.analytic;
        j["measured"] = r.measured;
        j["margin"] = r.margin();
        j["pass"] = r.pass();
        j["constants"] = r.estimated_constants ? "estimated" : "declared";
        if (r.low_trial_warning) j["warning"] = "fewer than 1000 Monte-Carlo trials";
        arr.push_back(std::move(j));
    }
    return arr.dump(2);
}

BoundReport check_smoothness(const std::vector<ModelPtr>& models, const ConstantSet& c,
                             int trials, RngStream& rng) {
    const DerivedConstants d = derived_constants(c);
    const double R = 1.0;  // pairs drawn in the unit-scale test ball
    double worst = 0.0;
    const int dim = models.front()->dim();
    for (int t = 0; t < trials; ++t) {
        Vec w1(static_cast<std::size_t>(dim)), w2(static_cast<std::size_t>(dim));
        for (double& x : w1) x = R * rng.normal();
        for (double& x : w2) x = R * rng.normal();
        const double dist = std::sqrt(sq_dist(w1, w2));
        if (dist < 1e-12) continue;
        for (const ModelPtr& m : models) {
            const Vec g1 = meta_grad_exact(*m, w1, c.alpha);
            const Vec g2 = meta_grad_exact(*m, w2, c.alpha);
            worst = std::max(worst, std::sqrt(sq_dist(g1, g2)) / dist);
        }
    }
    BoundReport rep;
    rep.name = "smoothness L_F";
    rep.analytic = d.L_F;
    rep.measured = worst;
    rep.estimated_constants = c.estimated;
    return rep;
}

std::pair<BoundReport, BoundReport> check_estimator_moments(const LossModel& model,
                                                            const MetaEstimator& est,
                                                            const Vec& w, long mc_trials,
                                                            const ConstantSet& c,
                                                            std::uint64_t seed) {
    if (mc_trials < 1) throw std::invalid_argument("check_estimator_moments: trials >= 1");
    const DerivedConstants d = derived_constants(c);

    const Vec exact = meta_grad_exact(model, w, est.alpha);
    Vec sum_err = zeros(w.size());
    double sum_sq = 0.0, sum_sq2 = 0.0;
    double sum_coord_sq = 0.0;  // total second moment of the error vector
    for (long t = 0; t < mc_trials; ++t) {
        RngPath path{seed, static_cast<std::uint64_t>(t), 0, 0};
        const MetaGradSample s = meta_grad(model, w, est, path);
        Vec err = s.value;
        axpy(-1.0, exact, err);
        axpy(1.0, err, sum_err);
        const double sq = dot(err, err);
        sum_sq += sq;
        sum_sq2 += sq * sq;
        sum_coord_sq += sq;
    }
    const double T = static_cast<double>(mc_trials);
    Vec mean_err = sum_err;
    scale(mean_err, 1.0 / T);
    const double bias = norm(mean_err);
    const double mse = sum_sq / T;

    // 99% one-sided confidence adjustments
    const double z = 2.3263478740408408;
    const double trace_cov = std::max(0.0, sum_coord_sq / T - dot(mean_err, mean_err));
    const double bias_ci = bias + z * std::sqrt(trace_cov / T);
    const double mse_var = std::max(0.0, sum_sq2 / T - mse * mse);
    const double mse_ci = mse + z * std::sqrt(mse_var / T);

    double bias_bound = 0.0, mse_bound = 0.0;
    switch (est.kind) {
        case EstimatorKind::Stochastic:
            bias_bound = d.bias_bound;
            mse_bound = d.sigma_F2;
            break;
        case EstimatorKind::FO:
            bias_bound = d.m_fo;
            mse_bound = d.s_fo2;
            break;
        case EstimatorKind::HF:
            bias_bound = d.m_hf;
            mse_bound = d.s_hf2;
            break;
        case EstimatorKind::Exact:
            break;
    }

    BoundReport bias_rep;
    bias_rep.name = std::string("bias ") + estimator_name(est.kind);
    bias_rep.analytic = bias_bound;
    bias_rep.measured = bias_ci;
    bias_rep.estimated_constants = c.estimated;
    bias_rep.low_trial_warning = mc_trials < 1000;

    BoundReport mse_rep;
    mse_rep.name = std::string("second moment ") + estimator_name(est.kind);
    mse_rep.analytic = mse_bound;
    mse_rep.measured = mse_ci;
    mse_rep.estimated_constants = c.estimated;
    mse_rep.low_trial_warning = mc_trials < 1000;
    return {bias_rep, mse_rep};
}

BoundReport check_gamma_F(const std::vector<ModelPtr>& models, const ConstantSet& c,
                          const std::vector<Vec>& probes) {
    const DerivedConstants d = derived_constants(c);
    const int n = static_cast<int>(models.size());
    double worst = 0.0;
    for (const Vec& w : probes) {
        std::vector<Vec> grads;
        Vec mean = zeros(w.size());
        for (const ModelPtr& m : models) {
            grads.push_back(meta_grad_exact(*m, w, c.alpha));
            axpy(1.0 / n, grads.back(), mean);
        }
        double acc = 0.0;
        for (const Vec& g : grads) acc += sq_dist(g, mean) / n;
        worst = std::max(worst, acc);
    }
    BoundReport rep;
    rep.name = "meta dissimilarity gamma_F^2";
    rep.analytic = d.gamma_F2;
    rep.measured = worst;
    rep.estimated_constants = c.estimated;
    return rep;
}

std::vector<BoundReport> check_drift(const std::vector<RoundRecord>& history,
                                     const ConstantSet& c) {
    const DerivedConstants d = derived_constants(c);
    const double sigma_F = std::sqrt(d.sigma_F2);
    const double gamma_F = std::sqrt(d.gamma_F2);
    std::vector<BoundReport> out;
    for (const RoundRecord& rec : history) {
        if (rec.drift.mean_norm.empty())
            throw UnsupportedOperation("check_drift: round has no all-client traces");
        for (std::size_t t = 0; t < rec.drift.mean_norm.size(); ++t) {
            const double td = static_cast<double>(t);
            BoundReport m1;
            m1.name = "drift L1 k=" + std::to_string(rec.k) + " t=" + std::to_string(t);
            m1.analytic = 4.0 * c.beta * td * (sigma_F + gamma_F);
            m1.measured = rec.drift.mean_norm[t];
            m1.estimated_constants = c.estimated;
            out.push_back(m1);

            BoundReport m2;
            m2.name = "drift L2 k=" + std::to_string(rec.k) + " t=" + std::to_string(t);
            m2.analytic = 35.0 * c.beta * c.beta * td * c.tau * (2.0 * d.sigma_F2 + d.gamma_F2);
            m2.measured = rec.drift.mean_sq_norm[t];
            m2.estimated_constants = c.estimated;
            out.push_back(m2);
        }
    }
    return out;
}

double theorem_rhs(const ConstantSet& c, double F0_minus_Fstar) {
    const DerivedConstants d = derived_constants(c);
    if (c.beta > 1.0 / (10.0 * c.tau * d.L_F) + 1e-15)
        throw std::invalid_argument("theorem_rhs: hypothesis beta <= 1/(10 tau L_F) violated");
    const double tt = static_cast<double>(c.tau) * (c.tau - 1);
    const double mix = 2.0 * d.sigma_F2 + d.gamma_F2;
    const double fp_corr = c.n > 1 ? (1.0 - c.r) / (c.r * (c.n - 1)) : 0.0;
    const double sigma_T2 =
        280.0 * std::pow(c.beta * d.L_F, 2) * tt * mix +
        c.beta * d.L_F * (2.0 * d.sigma_F2 + d.gamma_F2 * fp_corr) +
        4.0 * std::pow(c.alpha * c.L, 2) * c.sigma_G * c.sigma_G / c.D;
    return 4.0 * F0_minus_Fstar / (c.beta * c.tau * c.rounds) + 4.0 * sigma_T2;
}

}  // namespace pfl
