#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pfl/loss_model.hpp"

namespace pfl {

// Finite-support probability mass function over points of a metric space.
struct DiscreteDistribution {
    std::vector<std::vector<double>> points;
    std::vector<double> mass;

    void validate() const;  // masses >= 0, sum to 1 within 1e-9
};

using MetricFn = std::function<double(const std::vector<double>&, const std::vector<double>&)>;

double euclidean_metric(const std::vector<double>& a, const std::vector<double>& b);

// p = (1/n) sum p_i over the union support
DiscreteDistribution average_distribution(const std::vector<DiscreteDistribution>& dists);

// empirical PMF over class labels
DiscreteDistribution label_distribution(const std::vector<Sample>& samples);

// (1/2) sum_z |p(z) - q(z)| over the union support
double tv_distance(const DiscreteDistribution& p, const DiscreteDistribution& q);

// Exact optimal transport cost: sorted-CDF formula for 1-D Euclidean
// supports, exact min-cost-flow solve otherwise (supports capped at
// kW1GeneralSupportCap points per side).
inline constexpr std::size_t kW1GeneralSupportCap = 64;
double wasserstein1(const DiscreteDistribution& p, const DiscreteDistribution& q,
                    const MetricFn& metric = euclidean_metric);

// empirical Assumption-5 constants: max over probe points of
// (1/n) sum |grad f_i - grad f|^2 and the Hessian analogue. The Hessian term
// uses exact operator norms when every model is a QuadraticTask, otherwise
// random unit HVP probes (a lower bound on the operator-norm quantity).
std::pair<double, double> estimate_gamma(const std::vector<ModelPtr>& models,
                                         const std::vector<Vec>& probe_points,
                                         int hess_probes, RngStream& rng);

// 4B^2 (1/n) sum TV(p_i,p)^2 and 4L^2 (1/n) sum TV(p_i,p)^2
std::pair<double, double> tv_gamma_bound(const std::vector<DiscreteDistribution>& dists,
                                         double B, double L);

// L_Z^2 (1/n) sum W1(p_i,p)^2 and rho_Z^2 (1/n) sum W1(p_i,p)^2
std::pair<double, double> w1_gamma_bound(const std::vector<DiscreteDistribution>& dists,
                                         double L_Z, double rho_Z,
                                         const MetricFn& metric = euclidean_metric);

// Label-skew partition: n/2 group-one users hold `a` samples of each of
// classes 0-4; group-two user j holds a/2 of class (j mod 5) and 2a of class
// 5 + (j mod 5). The diff-hetero variant drops the a/2 block.
struct PartitionSpec {
    int n = 10;
    int a = 4;
    bool diff_hetero = false;

    void validate() const;
};

// per-user per-class sample counts, n x 10
std::vector<std::vector<int>> partition_counts(const PartitionSpec& spec);

// Disjoint assignment of sample ids drawn from per-class pools; pools are
// shuffled with the given stream before dealing. Throws DataError naming the
// class on shortage.
std::vector<std::vector<int>> partition_dataset(
    const std::vector<std::vector<int>>& pool_by_class, const PartitionSpec& spec,
    RngStream& rng);

struct SimilarityReport {
    double gamma_G2 = 0.0;
    double gamma_H2 = 0.0;
    std::vector<double> tv;  // per-user TV(p_i, p)
    std::vector<double> w1;  // per-user W1(p_i, p)
    double tv_bound_G2 = 0.0, tv_bound_H2 = 0.0;
    double w1_bound_G2 = 0.0, w1_bound_H2 = 0.0;

    std::string to_json() const;
};

std::string partition_csv(const std::vector<std::vector<int>>& assignment);

}  // namespace pfl
