#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "pfl/loss_model.hpp"

namespace pfl {

// Analytic task f(w) = 1/2 w'Aw + b'w with A symmetric. Per-sample oracles
// add controlled noise with exactly known second moments:
//   grad_sample  = A w + b + xi,      xi i.i.d. per sample, coord std grad_noise_std
//   hvp_sample   = (A + Xi) v,        Xi = s * hess_noise_std * u u', s = +-1, |u| = 1
// so sigma_G = sqrt(d) * grad_noise_std and sigma_H = hess_noise_std exactly.
// The per-sample loss carries the xi'w term, keeping grad_sample consistent
// with finite differences of the per-sample loss.
class QuadraticTask : public LossModel {
public:
    QuadraticTask(Eigen::MatrixXd A, Eigen::VectorXd b, double grad_noise_std = 0.0,
                  double hess_noise_std = 0.0, double domain_radius = 10.0,
                  std::uint64_t task_seed = 0);

    int dim() const override { return static_cast<int>(b_.size()); }

    double loss(const Sample& s, const Vec& w) const override;
    Vec grad_sample(const Sample& s, const Vec& w) const override;
    Vec hvp_sample(const Sample& s, const Vec& w, const Vec& v) const override;
    Sample draw_sample(RngStream& rng) const override;

    bool has_exact() const override { return true; }
    double exact_loss(const Vec& w) const override;
    Vec exact_grad(const Vec& w) const override;
    Vec exact_hvp(const Vec& w, const Vec& v) const override;

    const Eigen::MatrixXd& A() const { return A_; }
    const Eigen::VectorXd& b() const { return b_; }
    double grad_noise_std() const { return grad_noise_std_; }
    double hess_noise_std() const { return hess_noise_std_; }

private:
    Eigen::VectorXd grad_noise(std::uint64_t key) const;

    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    double grad_noise_std_;
    double hess_noise_std_;
    std::uint64_t task_seed_;
};

}  // namespace pfl
