#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "pfl/finite_diff.hpp"
#include "pfl/idx_io.hpp"
#include "pfl/mlp_elu.hpp"
#include "pfl/quadratic.hpp"
#include "pfl/synthetic.hpp"

using namespace pfl;

namespace {

std::shared_ptr<QuadraticTask> random_quadratic(int d, RngStream& rng, double grad_noise = 0.0,
                                                double hess_noise = 0.0) {
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = rng.normal();
    Eigen::MatrixXd A = 0.5 * (M + M.transpose());
    Eigen::VectorXd b(d);
    for (int i = 0; i < d; ++i) b(i) = rng.normal();
    return std::make_shared<QuadraticTask>(A, b, grad_noise, hess_noise, 10.0, rng.next_u64());
}

std::vector<Sample> mlp_samples(int in, int classes, int count, RngStream& rng) {
    std::vector<Sample> out;
    for (int i = 0; i < count; ++i) {
        Sample s;
        s.key = static_cast<std::uint64_t>(i);
        s.label = i % classes;
        for (int j = 0; j < in; ++j) s.x.push_back(rng.normal());
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("batch_grad basics on quadratics") {
    RngStream rng(21);
    auto task = random_quadratic(4, rng);
    const Vec w = {0.2, -0.5, 1.0, 0.3};

    Batch one;
    one.samples.push_back(task->draw_sample(rng));
    CHECK(batch_grad(*task, w, one) == task->grad_sample(one.samples[0], w));

    Batch many = draw_batch(*task, 7, rng);
    const Vec g = batch_grad(*task, w, many);
    const Vec exact = task->exact_grad(w);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(g[i] == doctest::Approx(exact[i]));

    Batch empty;
    CHECK_THROWS_AS(batch_grad(*task, w, empty), std::invalid_argument);
}

TEST_CASE("noisy batch_grad is unbiased") {
    RngStream rng(22);
    auto task = random_quadratic(3, rng, 1.0);
    const Vec w = {0.1, 0.2, -0.4};
    const Vec exact = task->exact_grad(w);

    Vec mean = zeros(3);
    const int trials = 10000, D = 64;
    for (int t = 0; t < trials; ++t) {
        const Batch b = draw_batch(*task, D, rng);
        axpy(1.0 / trials, batch_grad(*task, w, b), mean);
    }
    const double tol = 3.0 / std::sqrt(static_cast<double>(D) * trials);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(mean[static_cast<std::size_t>(i)] - exact[static_cast<std::size_t>(i)]) < tol * 1.5);
}

TEST_CASE("batch_hvp linearity and exactness") {
    RngStream rng(23);
    auto task = random_quadratic(4, rng);
    const Vec w = {0.0, 1.0, -1.0, 0.5};
    const Batch b = draw_batch(*task, 5, rng);
    CHECK(batch_hvp(*task, w, zeros(4), b) == zeros(4));
    const Vec v = {1.0, 0.0, 2.0, -1.0};
    const Vec h = batch_hvp(*task, w, v, b);
    const Vec exact = task->exact_hvp(w, v);
    for (int i = 0; i < 4; ++i) CHECK(h[static_cast<std::size_t>(i)] == doctest::Approx(exact[static_cast<std::size_t>(i)]));
}

TEST_CASE("quadratic per-sample gradient matches finite differences of per-sample loss") {
    RngStream rng(24);
    auto task = random_quadratic(3, rng, 0.7);
    for (int probe = 0; probe < 20; ++probe) {
        const Sample s = task->draw_sample(rng);
        Vec w = {rng.normal(), rng.normal(), rng.normal()};
        const Vec g = task->grad_sample(s, w);
        const Vec fd = finite_diff_grad([&](const Vec& x) { return task->loss(s, x); }, w);
        for (int i = 0; i < 3; ++i)
            CHECK(g[static_cast<std::size_t>(i)] == doctest::Approx(fd[static_cast<std::size_t>(i)]).epsilon(1e-6));
    }
}

TEST_CASE("quadratic declared constants") {
    Eigen::MatrixXd A(2, 2);
    A << 2.0, 0.0, 0.0, -1.0;
    QuadraticTask task(A, Eigen::VectorXd::Zero(2), 0.5, 0.25, 3.0, 1);
    CHECK(task.constants().L == doctest::Approx(2.0));
    CHECK(task.constants().rho == 0.0);
    CHECK(task.constants().sigma_G == doctest::Approx(0.5 * std::sqrt(2.0)));
    CHECK(task.constants().sigma_H == doctest::Approx(0.25));
    CHECK(task.constants().B == doctest::Approx(2.0 * 3.0 + 0.0));

    Eigen::MatrixXd bad(2, 2);
    bad << 0.0, 1.0, 0.0, 0.0;
    CHECK_THROWS(QuadraticTask(bad, Eigen::VectorXd::Zero(2)));
}

TEST_CASE("synthetic federation: zero spread means identical tasks") {
    RngStream rng(31);
    SyntheticSpec spec;
    spec.convex = true;
    const auto fed = make_synthetic_federation(4, 3, spec, rng);
    CHECK(fed.tasks.size() == 4);
    for (const auto& t : fed.tasks) {
        CHECK((t->A() - fed.tasks[0]->A()).norm() == 0.0);
        CHECK((t->b() - fed.tasks[0]->b()).norm() == 0.0);
    }
    CHECK(fed.gamma_H2() == 0.0);
    CHECK(fed.gamma_G2(5.0) == 0.0);
}

TEST_CASE("synthetic federation: convex flag forces positive definite Hessians") {
    RngStream rng(32);
    SyntheticSpec spec;
    spec.convex = true;
    spec.hess_spread = 0.8;
    spec.grad_spread = 0.5;
    const auto fed = make_synthetic_federation(6, 4, spec, rng);
    for (const auto& t : fed.tasks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t->A());
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("synthetic federation: dissimilarity never exceeds the declared envelope") {
    RngStream rng(33);
    SyntheticSpec spec;
    spec.hess_spread = 0.4;
    spec.grad_spread = 0.7;
    spec.convex = true;
    const auto fed = make_synthetic_federation(8, 3, spec, rng);
    const int n = static_cast<int>(fed.tasks.size());
    const double R = 2.0;
    for (int probe = 0; probe < 50; ++probe) {
        Vec w(3);
        for (double& x : w) x = R / std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
        Vec mean = zeros(3);
        std::vector<Vec> grads;
        for (const auto& t : fed.tasks) {
            grads.push_back(t->exact_grad(w));
            axpy(1.0 / n, grads.back(), mean);
        }
        double acc = 0.0;
        for (const Vec& g : grads) acc += sq_dist(g, mean) / n;
        CHECK(acc <= fed.gamma_G2(R) * (1.0 + 1e-9));
    }
    // Hessian deviations: rank-one perturbations with unit-mean-square weights
    Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(3, 3);
    for (const auto& t : fed.tasks) Abar += t->A() / n;
    double hacc = 0.0;
    for (const auto& t : fed.tasks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t->A() - Abar);
        hacc += std::pow(es.eigenvalues().cwiseAbs().maxCoeff(), 2) / n;
    }
    CHECK(hacc == doctest::Approx(fed.gamma_H2()).epsilon(1e-9));
}

TEST_CASE("estimate_sigma recovers injected noise") {
    RngStream rng(34);
    auto clean = random_quadratic(3, rng);
    std::vector<Vec> probes = {{0.0, 0.0, 0.0}, {1.0, -1.0, 0.5}};
    const auto [sg0, sh0] = estimate_sigma(*clean, probes, 200, rng);
    CHECK(sg0 == 0.0);
    CHECK(sh0 == 0.0);

    const double sigma = 0.6;
    auto noisy = random_quadratic(3, rng, sigma);
    const auto [sg, sh] = estimate_sigma(*noisy, probes, 100000, rng);
    const double expected2 = 3.0 * sigma * sigma;  // d sigma^2
    CHECK(std::abs(sg * sg - expected2) / expected2 < 0.10);
    CHECK(sh == 0.0);
}

TEST_CASE("mlp: zero weights on a balanced batch gives ln C") {
    RngStream rng(41);
    const auto data = mlp_samples(4, 10, 10, rng);
    MlpEluModel mlp({4, 6, 10}, data);
    const Vec w0 = zeros(static_cast<std::size_t>(mlp.dim()));
    Batch b;
    b.samples = data;
    CHECK(batch_loss(mlp, w0, b) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("mlp gradient matches finite differences on a tiny net") {
    RngStream rng(42);
    const auto data = mlp_samples(4, 3, 5, rng);
    MlpEluModel mlp({4, 6, 5, 3}, data);
    const Vec w = mlp.init_weights(rng);
    Batch b;
    b.samples = data;
    const Vec g = mlp.exact_grad(w);
    const Vec fd = finite_diff_grad([&](const Vec& x) { return mlp.exact_loss(x); }, w);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        num += (g[i] - fd[i]) * (g[i] - fd[i]);
        den += fd[i] * fd[i];
    }
    CHECK(std::sqrt(num / den) < 1e-5);
}

TEST_CASE("mlp loss and gradient invariant under sample duplication") {
    RngStream rng(43);
    const auto data = mlp_samples(4, 3, 6, rng);
    MlpEluModel mlp({4, 5, 3}, data);
    const Vec w = mlp.init_weights(rng);
    Batch b, doubled;
    b.samples = data;
    doubled.samples = data;
    doubled.samples.insert(doubled.samples.end(), data.begin(), data.end());
    CHECK(batch_loss(mlp, w, b) == doctest::Approx(batch_loss(mlp, w, doubled)).epsilon(1e-12));
    const Vec g1 = batch_grad(mlp, w, b);
    const Vec g2 = batch_grad(mlp, w, doubled);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
}

TEST_CASE("mlp hvp is symmetric") {
    RngStream rng(44);
    const auto data = mlp_samples(4, 3, 4, rng);
    MlpEluModel mlp({4, 6, 3}, data);
    const Vec w = mlp.init_weights(rng);
    Batch b;
    b.samples = data;
    for (int probe = 0; probe < 5; ++probe) {
        Vec u(static_cast<std::size_t>(mlp.dim())), v(static_cast<std::size_t>(mlp.dim()));
        for (double& x : u) x = rng.normal();
        for (double& x : v) x = rng.normal();
        const double uv = dot(u, batch_hvp(mlp, w, v, b));
        const double vu = dot(v, batch_hvp(mlp, w, u, b));
        CHECK(uv == doctest::Approx(vu).epsilon(1e-10));
    }
}

TEST_CASE("idx round trip and pairing") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pfl_idx_test";
    fs::create_directories(dir);
    RngStream rng(51);
    std::vector<std::vector<double>> images;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> img(6 * 4);
        for (double& p : img) p = std::floor(rng.uniform() * 256.0) / 255.0;
        images.push_back(std::move(img));
        labels.push_back(i % 10);
    }
    const std::string ip = (dir / "imgs").string();
    const std::string lp = (dir / "lbls").string();
    write_idx_images(ip, 6, 4, images);
    write_idx_labels(lp, labels);

    const IdxImages back = read_idx_images(ip);
    CHECK(back.rows == 6);
    CHECK(back.cols == 4);
    REQUIRE(back.images.size() == images.size());
    for (std::size_t i = 0; i < images.size(); ++i)
        for (std::size_t j = 0; j < images[i].size(); ++j)
            CHECK(back.images[i][j] == doctest::Approx(images[i][j]).epsilon(1e-12));
    CHECK(read_idx_labels(lp) == labels);

    const auto ds = load_idx_dataset(ip, lp);
    REQUIRE(ds.size() == 12);
    CHECK(ds[3].label == 3);
    CHECK(ds[3].key == 3);
    CHECK(ds[3].x.size() == 24);

    write_idx_labels((dir / "short").string(), {0, 1});
    CHECK_THROWS_AS(load_idx_dataset(ip, (dir / "short").string()), DataError);
    CHECK_THROWS_AS(read_idx_images((dir / "lbls").string()), DataError);
}
