#include "pfl/quadratic.hpp"

#include <stdexcept>

namespace pfl {

namespace {
Eigen::Map<const Eigen::VectorXd> as_eigen(const Vec& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }
}  // namespace

QuadraticTask::QuadraticTask(Eigen::MatrixXd A, Eigen::VectorXd b, double grad_noise_std,
                             double hess_noise_std, double domain_radius,
                             std::uint64_t task_seed)
    : A_(std::move(A)),
      b_(std::move(b)),
      grad_noise_std_(grad_noise_std),
      hess_noise_std_(hess_noise_std),
      task_seed_(task_seed) {
    if (A_.rows() != A_.cols() || A_.rows() != b_.size()) {
        throw std::invalid_argument("QuadraticTask: A must be d x d and b length d");
    }
    if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("QuadraticTask: A must be symmetric to 1e-12");
    }
    const double d = static_cast<double>(b_.size());
    const double L = A_.operatorNorm();
    constants_.L = L;
    constants_.rho = 0.0;
    constants_.radius = domain_radius;
    constants_.B = L * domain_radius + b_.norm();
    constants_.sigma_G = std::sqrt(d) * grad_noise_std_;
    constants_.sigma_H = hess_noise_std_;
}

Eigen::VectorXd QuadraticTask::grad_noise(std::uint64_t key) const {
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(b_.size());
    if (grad_noise_std_ != 0.0) {
        RngStream rng(task_seed_, key, 0, 0, static_cast<std::uint64_t>(Purpose::SampleNoise));
        for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = grad_noise_std_ * rng.normal();
    }
    return xi;
}

double QuadraticTask::loss(const Sample& s, const Vec& w) const {
    auto wv = as_eigen(w);
    return 0.5 * wv.dot(A_ * wv) + b_.dot(wv) + grad_noise(s.key).dot(wv);
}

Vec QuadraticTask::grad_sample(const Sample& s, const Vec& w) const {
    auto wv = as_eigen(w);
    return to_vec((A_ * wv + b_ + grad_noise(s.key)).eval());
}

Vec QuadraticTask::hvp_sample(const Sample& s, const Vec& w, const Vec& v) const {
    (void)w;  // Hessian independent of w
    auto vv = as_eigen(v);
    Eigen::VectorXd r = A_ * vv;
    if (hess_noise_std_ != 0.0) {
        // Xi = sign * sigma_H * u u' with u a uniformly random unit vector.
        // Spectral norm is exactly sigma_H and the sign makes it mean-zero.
        RngStream rng(task_seed_, s.key, 0, 0, static_cast<std::uint64_t>(Purpose::HessNoise));
        Eigen::VectorXd u(b_.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
        const double un = u.norm();
        if (un > 0) {
            u /= un;
            const double sign = (rng.uniform() < 0.5) ? -1.0 : 1.0;
            r += sign * hess_noise_std_ * u * u.dot(vv);
        }
    }
    return to_vec(r);
}

Sample QuadraticTask::draw_sample(RngStream& rng) const {
    Sample s;
    s.key = rng.next_u64();
    return s;
}

double QuadraticTask::exact_loss(const Vec& w) const {
    auto wv = as_eigen(w);
    return 0.5 * wv.dot(A_ * wv) + b_.dot(wv);
}

Vec QuadraticTask::exact_grad(const Vec& w) const {
    auto wv = as_eigen(w);
    return to_vec((A_ * wv + b_).eval());
}

Vec QuadraticTask::exact_hvp(const Vec&, const Vec& v) const {
    auto vv = as_eigen(v);
    return to_vec((A_ * vv).eval());
}

}  // namespace pfl
