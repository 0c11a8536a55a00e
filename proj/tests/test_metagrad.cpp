#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cubic_task.hpp"
#include "pfl/federation.hpp"
#include "pfl/finite_diff.hpp"
#include "pfl/metagrad.hpp"
#include "pfl/quadratic.hpp"
#include "pfl/synthetic.hpp"

using namespace pfl;

namespace {

std::shared_ptr<QuadraticTask> scalar_task(double a, double b, double grad_noise = 0.0,
                                           double hess_noise = 0.0, std::uint64_t seed = 0) {
    Eigen::MatrixXd A(1, 1);
    A << a;
    Eigen::VectorXd bv(1);
    bv << b;
    return std::make_shared<QuadraticTask>(A, bv, grad_noise, hess_noise, 10.0, seed);
}

std::shared_ptr<QuadraticTask> random_task(int d, RngStream& rng, double grad_noise = 0.0,
                                           double hess_noise = 0.0) {
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = rng.normal();
    Eigen::MatrixXd A = 0.5 * (M + M.transpose());
    Eigen::VectorXd b(d);
    for (int i = 0; i < d; ++i) b(i) = rng.normal();
    return std::make_shared<QuadraticTask>(A, b, grad_noise, hess_noise, 10.0, rng.next_u64());
}

}  // namespace

TEST_CASE("meta_loss closed forms") {
    auto t = scalar_task(2.0, 0.0);
    // f(w) = w^2; w=1, alpha=0.25: inner point 1 - 0.25*2 = 0.5, f(0.5) = 0.25
    CHECK(meta_loss(*t, {1.0}, 0.25) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(meta_loss(*t, {1.0}, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    // stationary point of f is fixed under the inner step
    auto t2 = scalar_task(2.0, -2.0);  // min at w = 1
    CHECK(meta_loss(*t2, {1.0}, 0.3) == doctest::Approx(t2->exact_loss({1.0})).epsilon(1e-14));
}

TEST_CASE("meta_grad_exact closed forms and finite differences") {
    auto t = scalar_task(2.0, 0.0);
    CHECK(meta_grad_exact(*t, {1.0}, 0.25)[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(meta_grad_exact(*t, {1.0}, 0.0)[0] == doctest::Approx(2.0).epsilon(1e-14));

    RngStream rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        auto q = random_task(5, rng);
        const double alpha = 0.2 / q->constants().L;
        Vec w(5);
        for (double& x : w) x = rng.normal();
        const Vec g = meta_grad_exact(*q, w, alpha);
        const Vec fd = finite_diff_grad([&](const Vec& x) { return meta_loss(*q, x, alpha); }, w);
        CHECK(std::sqrt(sq_dist(g, fd)) / (norm(fd) + 1e-12) < 1e-6);
    }
}

TEST_CASE("noiseless stochastic estimator equals the exact meta-gradient") {
    RngStream rng(62);
    auto q = random_task(4, rng);
    MetaEstimator est;
    est.kind = EstimatorKind::Stochastic;
    est.alpha = 0.1 / q->constants().L;
    est.batch_d = 3;
    est.batch_d1 = 2;
    est.batch_d2 = 5;
    for (int i = 0; i < 20; ++i) {
        Vec w(4);
        for (double& x : w) x = rng.normal();
        const Vec exact = meta_grad_exact(*q, w, est.alpha);
        const auto s = meta_grad_stochastic(*q, w, est, RngPath{7, static_cast<std::uint64_t>(i), 0, 0});
        for (int j = 0; j < 4; ++j)
            CHECK(std::abs(s.value[static_cast<std::size_t>(j)] - exact[static_cast<std::size_t>(j)]) < 1e-12);
    }
}

TEST_CASE("estimators replay identically on equal rng paths") {
    RngStream rng(63);
    auto q = random_task(3, rng, 0.5, 0.3);
    MetaEstimator est;
    est.kind = EstimatorKind::Stochastic;
    est.alpha = 0.1;
    est.batch_d = est.batch_d1 = est.batch_d2 = 4;
    const Vec w = {0.3, -0.2, 0.9};
    const RngPath path{99, 5, 2, 1};
    CHECK(meta_grad(*q, w, est, path).value == meta_grad(*q, w, est, path).value);
    est.kind = EstimatorKind::HF;
    CHECK(meta_grad(*q, w, est, path).value == meta_grad(*q, w, est, path).value);
}

TEST_CASE("fo estimator drops exactly the Hessian factor") {
    RngStream rng(64);
    auto q = random_task(4, rng);
    const double L = q->constants().L;
    MetaEstimator est;
    est.kind = EstimatorKind::FO;
    est.alpha = 0.3 / L;
    est.batch_d = est.batch_d1 = 2;

    Vec w = {0.5, -1.0, 0.2, 0.0};
    const auto fo = meta_grad_fo(*q, w, est, RngPath{1, 0, 0, 0});
    const Vec exact = meta_grad_exact(*q, w, est.alpha);
    // noiseless: fo - exact = alpha A grad f(inner point)
    const Vec g_inner = q->exact_grad(fo.inner_point);
    Vec expected_gap = q->exact_hvp(w, g_inner);
    scale(expected_gap, est.alpha);
    CHECK(std::sqrt(sq_dist(fo.value, exact)) ==
          doctest::Approx(norm(expected_gap)).epsilon(1e-10));

    // alpha = 0 collapses to the plain gradient
    est.alpha = 0.0;
    const auto plain = meta_grad_fo(*q, w, est, RngPath{1, 0, 0, 0});
    const Vec g = q->exact_grad(w);
    for (int j = 0; j < 4; ++j)
        CHECK(plain.value[static_cast<std::size_t>(j)] == doctest::Approx(g[static_cast<std::size_t>(j)]).epsilon(1e-12));
}

TEST_CASE("hf estimator is exact on noiseless quadratics for any probe scale") {
    RngStream rng(65);
    auto q = random_task(5, rng);
    MetaEstimator est;
    est.kind = EstimatorKind::HF;
    est.alpha = 0.2 / q->constants().L;
    est.batch_d = est.batch_d1 = est.batch_d2 = 3;
    for (double delta : {1e-3, 1e-1, -1.0}) {
        est.delta = delta;
        Vec w(5);
        for (double& x : w) x = rng.normal();
        const auto hf = meta_grad_hf(*q, w, est, RngPath{3, 1, 0, 0});
        const Vec exact = meta_grad_exact(*q, w, est.alpha);
        CHECK(std::sqrt(sq_dist(hf.value, exact)) < 1e-10);
    }
}

TEST_CASE("hf probe-scale bias on a cubic-regularized task stays under the slope bound") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd b(3);
    b << 0.4, -0.2, 0.1;
    const double rho0 = 0.8;
    testing::CubicTask cubic(A, b, rho0);

    const Vec w = {0.6, -0.3, 0.5};
    MetaEstimator est;
    est.kind = EstimatorKind::HF;
    est.alpha = 0.2;
    est.batch_d = est.batch_d1 = est.batch_d2 = 1;

    // gradient-norm bound over the region the probes visit
    double B = 0.0;
    for (double r : {0.0, 0.5, 1.0, 1.5})
        B = std::max(B, (A.operatorNorm() + rho0 / 2.0 * r) * r + b.norm());

    const Vec exact = meta_grad_exact(cubic, w, est.alpha);
    double prev = 0.0;
    for (double delta : {1e-3, 1e-2, 1e-1}) {
        est.delta = delta;
        const auto hf = meta_grad_hf(cubic, w, est, RngPath{5, 0, 0, 0});
        const double err = std::sqrt(sq_dist(hf.value, exact));
        CHECK(err <= est.alpha * rho0 * delta * B * B);
        CHECK(err >= prev);  // bias grows with the probe scale
        prev = err;
    }
}

TEST_CASE("local_update_step and the two-stage identity") {
    RngStream rng(66);
    auto q = random_task(3, rng, 0.4);
    MetaEstimator est;
    est.kind = EstimatorKind::Stochastic;
    est.alpha = 0.1;
    est.batch_d = est.batch_d1 = est.batch_d2 = 4;
    const Vec w = {1.0, 0.0, -0.5};
    const RngPath path{17, 2, 3, 1};

    CHECK(local_update_step(*q, w, est, 0.0, path) == w);

    const auto sample = meta_grad(*q, w, est, path);
    Vec expected = w;
    axpy(-0.05, sample.value, expected);
    CHECK(local_update_step(*q, w, est, 0.05, path) == expected);
}

TEST_CASE("exact meta descent decreases the gradient norm monotonically") {
    RngStream rng(67);
    SyntheticSpec spec;
    spec.convex = true;
    spec.hess_spread = 0.3;
    spec.grad_spread = 0.5;
    const auto fed = make_synthetic_federation(4, 3, spec, rng);
    const auto models = fed.as_models();
    const double alpha = 0.1 / fed.max_L();
    const double beta = 0.3 / (4.0 * fed.max_L());

    Vec w = {1.0, -1.0, 0.5};
    double prev = norm(average_meta_grad(models, w, alpha));
    for (int t = 0; t < 100; ++t) {
        Vec g = average_meta_grad(models, w, alpha);
        axpy(-beta, g, w);
        const double cur = norm(average_meta_grad(models, w, alpha));
        CHECK(cur <= prev * (1.0 + 1e-12));
        prev = cur;
    }
}

TEST_CASE("estimator validation") {
    MetaEstimator est;
    est.alpha = 0.3;
    CHECK_THROWS_AS(est.validate(4.0), std::invalid_argument);
    est.alpha = 0.1;
    CHECK_NOTHROW(est.validate(4.0));
    est.kind = EstimatorKind::Stochastic;
    est.batch_d = 0;
    CHECK_THROWS_AS(est.validate(), std::invalid_argument);
}

TEST_CASE("smoothness of the meta-gradient on quadratics") {
    RngStream rng(68);
    for (int rep = 0; rep < 3; ++rep) {
        auto q = random_task(4, rng);
        const double L = q->constants().L;
        const double alpha = 0.5 / L;
        double worst = 0.0;
        for (int i = 0; i < 300; ++i) {
            Vec w1(4), w2(4);
            for (double& x : w1) x = rng.normal();
            for (double& x : w2) x = rng.normal();
            const double dist = std::sqrt(sq_dist(w1, w2));
            if (dist < 1e-9) continue;
            worst = std::max(worst, std::sqrt(sq_dist(meta_grad_exact(*q, w1, alpha),
                                                      meta_grad_exact(*q, w2, alpha))) /
                                        dist);
        }
        CHECK(worst <= 4.0 * L * (1.0 + 1e-9));
        // exact Lipschitz constant of the linear map (I - aA) A (I - aA)
        Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
        const Eigen::MatrixXd M = (I - alpha * q->A()) * q->A() * (I - alpha * q->A());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        CHECK(worst <= es.eigenvalues().cwiseAbs().maxCoeff() + 1e-12);
    }
}
