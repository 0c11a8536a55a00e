#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfl/federation.hpp"

namespace pfl {

// Base constants of a testbed, with provenance. All derived bound
// expressions are evaluated from these.
struct ConstantSet {
    double B = 0.0;
    double L = 0.0;
    double rho = 0.0;
    double sigma_G = 0.0;
    double sigma_H = 0.0;
    double gamma_G = 0.0;
    double gamma_H = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    int tau = 1;
    int rounds = 1;
    int n = 1;
    double r = 1.0;
    int D = 1, D1 = 1, D2 = 1;
    double delta = 1e-3;
    bool estimated = false;  // constants sampled rather than declared

    void validate() const;  // alpha L <= 1
};

struct DerivedConstants {
    double L_F = 0.0;        // 4L + alpha rho B
    double sigma_F2 = 0.0;   // three-batch estimator second-moment bound
    double gamma_F2 = 0.0;   // 3 B^2 alpha^2 gamma_H^2 + 192 gamma_G^2
    double bias_bound = 0.0; // 2 alpha L sigma_G / sqrt(D)
    double m_fo = 0.0;
    double s_fo2 = 0.0;
    double m_hf = 0.0;
    double s_hf2 = 0.0;
};

DerivedConstants derived_constants(const ConstantSet& c);

struct BoundReport {
    std::string name;
    double analytic = 0.0;
    double measured = 0.0;
    bool estimated_constants = false;
    bool low_trial_warning = false;

    double margin() const { return analytic - measured; }
    // one-sided: bounds are inequalities
    bool pass() const { return measured <= analytic * (1.0 + 1e-9) + 1e-12; }
};

std::string bound_table(const std::vector<BoundReport>& reports);
std::string bounds_json(const std::vector<BoundReport>& reports);

// max Lipschitz ratio of exact meta-gradients over sampled pairs vs L_F
BoundReport check_smoothness(const std::vector<ModelPtr>& models, const ConstantSet& c,
                             int trials, RngStream& rng);

// Monte-Carlo bias / second moment of a sampled estimator at w vs the
// matching lemma bounds. For the MC bias the report additionally requires
// the 99% confidence upper bound of the measurement to clear the analytic
// value; `low_trial_warning` flags runs below 1000 trials.
std::pair<BoundReport, BoundReport> check_estimator_moments(const LossModel& model,
                                                            const MetaEstimator& est,
                                                            const Vec& w, long mc_trials,
                                                            const ConstantSet& c,
                                                            std::uint64_t seed);

// max over probe points of (1/n) sum |grad F_i - grad F|^2 vs gamma_F^2
BoundReport check_gamma_F(const std::vector<ModelPtr>& models, const ConstantSet& c,
                          const std::vector<Vec>& probes);

// measured drift moments per (k, t) vs 4 beta t (sigma_F + gamma_F) and
// 35 beta^2 t tau (2 sigma_F^2 + gamma_F^2); needs all-n traces
std::vector<BoundReport> check_drift(const std::vector<RoundRecord>& history,
                                     const ConstantSet& c);

// stationarity bound: 4 (F(w0) - F*) / (beta tau K) + 4 sigma_T^2 with
// sigma_T^2 = 280 (beta L_F)^2 tau(tau-1)(2 sigma_F^2 + gamma_F^2)
//           + beta L_F (2 sigma_F^2 + gamma_F^2 (1-r)/(r(n-1)))
//           + 4 alpha^2 L^2 sigma_G^2 / D
double theorem_rhs(const ConstantSet& c, double F0_minus_Fstar);

}  // namespace pfl
