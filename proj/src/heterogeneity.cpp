#include "pfl/heterogeneity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "pfl/errors.hpp"
#include "pfl/quadratic.hpp"

namespace pfl {

void DiscreteDistribution::validate() const {
    if (points.size() != mass.size())
        throw std::invalid_argument("DiscreteDistribution: point/mass size mismatch");
    double sum = 0.0;
    for (double m : mass) {
        if (m < -1e-15) throw std::invalid_argument("DiscreteDistribution: negative mass");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("DiscreteDistribution: masses must sum to 1");
}

double euclidean_metric(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("euclidean_metric: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = a[i] - b[i];
        s += e * e;
    }
    return std::sqrt(s);
}

namespace {
using PointKey = std::vector<double>;

std::map<PointKey, double> as_map(const DiscreteDistribution& p) {
    std::map<PointKey, double> m;
    for (std::size_t i = 0; i < p.points.size(); ++i) m[p.points[i]] += p.mass[i];
    return m;
}
}  // namespace

DiscreteDistribution average_distribution(const std::vector<DiscreteDistribution>& dists) {
    if (dists.empty()) throw std::invalid_argument("average_distribution: empty list");
    std::map<PointKey, double> acc;
    const double inv = 1.0 / static_cast<double>(dists.size());
    for (const DiscreteDistribution& p : dists) {
        p.validate();
        for (std::size_t i = 0; i < p.points.size(); ++i) acc[p.points[i]] += inv * p.mass[i];
    }
    DiscreteDistribution out;
    for (const auto& [pt, m] : acc) {
        out.points.push_back(pt);
        out.mass.push_back(m);
    }
    return out;
}

DiscreteDistribution label_distribution(const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::invalid_argument("label_distribution: no samples");
    std::map<int, int> counts;
    for (const Sample& s : samples) ++counts[s.label];
    DiscreteDistribution out;
    for (const auto& [label, c] : counts) {
        out.points.push_back({static_cast<double>(label)});
        out.mass.push_back(static_cast<double>(c) / static_cast<double>(samples.size()));
    }
    return out;
}

double tv_distance(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    p.validate();
    q.validate();
    const auto pm = as_map(p);
    const auto qm = as_map(q);
    double acc = 0.0;
    for (const auto& [pt, m] : pm) {
        const auto it = qm.find(pt);
        acc += std::abs(m - (it == qm.end() ? 0.0 : it->second));
    }
    for (const auto& [pt, m] : qm) {
        if (pm.find(pt) == pm.end()) acc += m;
    }
    return 0.5 * acc;
}

namespace {

bool is_1d_euclidean(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    for (const auto& pt : p.points)
        if (pt.size() != 1) return false;
    for (const auto& pt : q.points)
        if (pt.size() != 1) return false;
    return true;
}

// integral of |F_p - F_q| over the line
double w1_sorted_1d(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    std::vector<std::pair<double, double>> events;  // (position, +p mass / -q mass)
    for (std::size_t i = 0; i < p.points.size(); ++i) events.push_back({p.points[i][0], p.mass[i]});
    for (std::size_t i = 0; i < q.points.size(); ++i) events.push_back({q.points[i][0], -q.mass[i]});
    std::sort(events.begin(), events.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double cost = 0.0, cdf_gap = 0.0, prev = events.front().first;
    for (const auto& [x, dm] : events) {
        cost += std::abs(cdf_gap) * (x - prev);
        cdf_gap += dm;
        prev = x;
    }
    return cost;
}

// Exact transportation solve: successive shortest augmenting paths with
// Dijkstra on Johnson potentials. Node layout: 0 = source, 1..m = suppliers,
// m+1..m+nq = consumers, m+nq+1 = sink.
double w1_mincost_flow(const std::vector<double>& sup, const std::vector<double>& dem,
                       const std::vector<std::vector<double>>& cost) {
    const int m = static_cast<int>(sup.size());
    const int nq = static_cast<int>(dem.size());
    const int S = 0, T = m + nq + 1, N = m + nq + 2;

    struct Arc {
        int to;
        double cap;
        double cost;
        int rev;
    };
    std::vector<std::vector<Arc>> g(static_cast<std::size_t>(N));
    auto add_arc = [&](int a, int b, double cap, double c) {
        g[static_cast<std::size_t>(a)].push_back({b, cap, c, static_cast<int>(g[static_cast<std::size_t>(b)].size())});
        g[static_cast<std::size_t>(b)].push_back({a, 0.0, -c, static_cast<int>(g[static_cast<std::size_t>(a)].size()) - 1});
    };
    for (int i = 0; i < m; ++i) add_arc(S, 1 + i, sup[static_cast<std::size_t>(i)], 0.0);
    for (int j = 0; j < nq; ++j) add_arc(1 + m + j, T, dem[static_cast<std::size_t>(j)], 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nq; ++j)
            add_arc(1 + i, 1 + m + j, std::numeric_limits<double>::infinity(),
                    cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);

    const double total = std::accumulate(sup.begin(), sup.end(), 0.0);
    std::vector<double> pot(static_cast<std::size_t>(N), 0.0);  // costs >= 0, so zero potentials start valid
    double shipped = 0.0, total_cost = 0.0;
    const double eps = 1e-12 * std::max(1.0, total);
    const int max_iter = 16 * (m + 2) * (nq + 2);

    for (int iter = 0; iter < max_iter && shipped < total - eps; ++iter) {
        // Dijkstra on reduced costs
        std::vector<double> dist(static_cast<std::size_t>(N), std::numeric_limits<double>::infinity());
        std::vector<int> pv(static_cast<std::size_t>(N), -1), pe(static_cast<std::size_t>(N), -1);
        using QE = std::pair<double, int>;
        std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
        dist[S] = 0.0;
        pq.push({0.0, S});
        while (!pq.empty()) {
            const auto [du, u] = pq.top();
            pq.pop();
            if (du > dist[static_cast<std::size_t>(u)] + 1e-15) continue;
            for (std::size_t e = 0; e < g[static_cast<std::size_t>(u)].size(); ++e) {
                const Arc& a = g[static_cast<std::size_t>(u)][e];
                if (a.cap <= eps) continue;
                const double nd = du + a.cost + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(a.to)];
                if (nd < dist[static_cast<std::size_t>(a.to)] - 1e-15) {
                    dist[static_cast<std::size_t>(a.to)] = nd;
                    pv[static_cast<std::size_t>(a.to)] = u;
                    pe[static_cast<std::size_t>(a.to)] = static_cast<int>(e);
                    pq.push({nd, a.to});
                }
            }
        }
        if (!std::isfinite(dist[static_cast<std::size_t>(T)]))
            throw NumericError("wasserstein1: transport network disconnected");
        for (int v = 0; v < N; ++v)
            if (std::isfinite(dist[static_cast<std::size_t>(v)]))
                pot[static_cast<std::size_t>(v)] += dist[static_cast<std::size_t>(v)];

        double push = total - shipped;
        for (int v = T; v != S; v = pv[static_cast<std::size_t>(v)])
            push = std::min(push, g[static_cast<std::size_t>(pv[static_cast<std::size_t>(v)])]
                                      [static_cast<std::size_t>(pe[static_cast<std::size_t>(v)])].cap);
        for (int v = T; v != S; v = pv[static_cast<std::size_t>(v)]) {
            Arc& a = g[static_cast<std::size_t>(pv[static_cast<std::size_t>(v)])]
                      [static_cast<std::size_t>(pe[static_cast<std::size_t>(v)])];
            a.cap -= push;
            g[static_cast<std::size_t>(a.to)][static_cast<std::size_t>(a.rev)].cap += push;
            total_cost += push * a.cost;
        }
        shipped += push;
    }
    if (shipped < total - 1e-9)
        throw NumericError("wasserstein1: min-cost flow failed to ship all mass");
    return total_cost;
}

void check_metric_probes(const DiscreteDistribution& p, const DiscreteDistribution& q,
                         const MetricFn& metric) {
    // spot-check metric axioms on a few support pairs
    std::vector<const std::vector<double>*> pts;
    for (const auto& x : p.points) pts.push_back(&x);
    for (const auto& x : q.points) pts.push_back(&x);
    const std::size_t probes = std::min<std::size_t>(pts.size(), 8);
    for (std::size_t i = 0; i < probes; ++i) {
        const auto& a = *pts[i];
        const auto& b = *pts[(i * 7 + 3) % pts.size()];
        const double dab = metric(a, b);
        const double dba = metric(b, a);
        if (dab < -1e-12 || std::abs(dab - dba) > 1e-9 * (1.0 + std::abs(dab)))
            throw std::invalid_argument("wasserstein1: supplied d(.,.) is not a metric");
        if (metric(a, a) > 1e-9)
            throw std::invalid_argument("wasserstein1: supplied d(.,.) has d(z,z) != 0");
    }
}

}  // namespace

double wasserstein1(const DiscreteDistribution& p, const DiscreteDistribution& q,
                    const MetricFn& metric) {
    p.validate();
    q.validate();
    check_metric_probes(p, q, metric);

    const bool default_metric = !metric || is_1d_euclidean(p, q);
    if (is_1d_euclidean(p, q) && default_metric) {
        // verify the metric is actually |x - y| before taking the fast path
        bool plain = true;
        if (!p.points.empty() && !q.points.empty()) {
            const double d = metric(p.points.front(), q.points.front());
            plain = std::abs(d - std::abs(p.points.front()[0] - q.points.front()[0])) < 1e-12;
        }
        if (plain) return w1_sorted_1d(p, q);
    }

    if (p.points.size() > kW1GeneralSupportCap || q.points.size() > kW1GeneralSupportCap) {
        throw std::invalid_argument(
            "wasserstein1: general-support solve capped at 64 points per side");
    }
    std::vector<std::vector<double>> cost(p.points.size(),
                                          std::vector<double>(q.points.size()));
    for (std::size_t i = 0; i < p.points.size(); ++i)
        for (std::size_t j = 0; j < q.points.size(); ++j)
            cost[i][j] = metric(p.points[i], q.points[j]);
    return w1_mincost_flow(p.mass, q.mass, cost);
}

std::pair<double, double> estimate_gamma(const std::vector<ModelPtr>& models,
                                         const std::vector<Vec>& probe_points,
                                         int hess_probes, RngStream& rng) {
    if (models.empty()) throw std::invalid_argument("estimate_gamma: no models");
    const int n = static_cast<int>(models.size());
    const int d = models.front()->dim();

    double gG2 = 0.0;
    for (const Vec& w : probe_points) {
        std::vector<Vec> grads;
        Vec mean = zeros(static_cast<std::size_t>(d));
        for (const ModelPtr& m : models) {
            grads.push_back(m->exact_grad(w));
            axpy(1.0 / n, grads.back(), mean);
        }
        double acc = 0.0;
        for (const Vec& g : grads) acc += sq_dist(g, mean) / n;
        gG2 = std::max(gG2, acc);
    }

    // Hessian part: exact spectral norms for quadratics, HVP probes otherwise
    bool all_quadratic = true;
    std::vector<const QuadraticTask*> quads;
    for (const ModelPtr& m : models) {
        const auto* q = dynamic_cast<const QuadraticTask*>(m.get());
        if (!q) {
            all_quadratic = false;
            break;
        }
        quads.push_back(q);
    }

    double gH2 = 0.0;
    if (all_quadratic) {
        Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(d, d);
        for (const auto* q : quads) Abar += q->A() / n;
        for (const auto* q : quads) {
            const double dev = (q->A() - Abar).operatorNorm();
            gH2 += dev * dev / n;
        }
    } else {
        for (const Vec& w : probe_points) {
            for (int p = 0; p < hess_probes; ++p) {
                Vec v(static_cast<std::size_t>(d));
                for (double& x : v) x = rng.normal();
                const double vn = norm(v);
                if (vn == 0.0) continue;
                scale(v, 1.0 / vn);
                std::vector<Vec> hv;
                Vec mean = zeros(static_cast<std::size_t>(d));
                for (const ModelPtr& m : models) {
                    hv.push_back(m->exact_hvp(w, v));
                    axpy(1.0 / n, hv.back(), mean);
                }
                double acc = 0.0;
                for (const Vec& h : hv) acc += sq_dist(h, mean) / n;
                gH2 = std::max(gH2, acc);
            }
        }
    }
    return {gG2, gH2};
}

std::pair<double, double> tv_gamma_bound(const std::vector<DiscreteDistribution>& dists,
                                         double B, double L) {
    const DiscreteDistribution avg = average_distribution(dists);
    double mean_tv2 = 0.0;
    for (const DiscreteDistribution& p : dists) {
        const double tv = tv_distance(p, avg);
        mean_tv2 += tv * tv / static_cast<double>(dists.size());
    }
    return {4.0 * B * B * mean_tv2, 4.0 * L * L * mean_tv2};
}

std::pair<double, double> w1_gamma_bound(const std::vector<DiscreteDistribution>& dists,
                                         double L_Z, double rho_Z, const MetricFn& metric) {
    const DiscreteDistribution avg = average_distribution(dists);
    double mean_w2 = 0.0;
    for (const DiscreteDistribution& p : dists) {
        const double w = wasserstein1(p, avg, metric);
        mean_w2 += w * w / static_cast<double>(dists.size());
    }
    return {L_Z * L_Z * mean_w2, rho_Z * rho_Z * mean_w2};
}

void PartitionSpec::validate() const {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("PartitionSpec: n must be even, >= 2");
    if (a < 2 || a % 2 != 0) throw std::invalid_argument("PartitionSpec: a must be even, >= 2");
}

std::vector<std::vector<int>> partition_counts(const PartitionSpec& spec) {
    spec.validate();
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(spec.n),
                                         std::vector<int>(10, 0));
    const int half = spec.n / 2;
    for (int u = 0; u < half; ++u)
        for (int c = 0; c < 5; ++c) counts[static_cast<std::size_t>(u)][static_cast<std::size_t>(c)] = spec.a;
    for (int j = 0; j < half; ++j) {
        const int u = half + j;
        if (!spec.diff_hetero)
            counts[static_cast<std::size_t>(u)][static_cast<std::size_t>(j % 5)] = spec.a / 2;
        counts[static_cast<std::size_t>(u)][static_cast<std::size_t>(5 + j % 5)] = 2 * spec.a;
    }
    return counts;
}

std::vector<std::vector<int>> partition_dataset(
    const std::vector<std::vector<int>>& pool_by_class, const PartitionSpec& spec,
    RngStream& rng) {
    if (pool_by_class.size() != 10)
        throw std::invalid_argument("partition_dataset: expected 10 class pools");
    const auto counts = partition_counts(spec);

    std::vector<int> demand(10, 0);
    for (const auto& row : counts)
        for (int c = 0; c < 10; ++c) demand[static_cast<std::size_t>(c)] += row[static_cast<std::size_t>(c)];
    for (int c = 0; c < 10; ++c) {
        if (static_cast<int>(pool_by_class[static_cast<std::size_t>(c)].size()) < demand[static_cast<std::size_t>(c)]) {
            throw DataError("partition_dataset: class " + std::to_string(c) + " needs " +
                            std::to_string(demand[static_cast<std::size_t>(c)]) + " samples, pool has " +
                            std::to_string(pool_by_class[static_cast<std::size_t>(c)].size()));
        }
    }

    // shuffle each pool, then deal in user order
    std::vector<std::vector<int>> shuffled = pool_by_class;
    for (auto& pool : shuffled) {
        for (std::size_t i = pool.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap(pool[i - 1], pool[j]);
        }
    }
    std::vector<std::size_t> cursor(10, 0);
    std::vector<std::vector<int>> assignment(static_cast<std::size_t>(spec.n));
    for (int u = 0; u < spec.n; ++u) {
        for (int c = 0; c < 10; ++c) {
            for (int k = 0; k < counts[static_cast<std::size_t>(u)][static_cast<std::size_t>(c)]; ++k) {
                assignment[static_cast<std::size_t>(u)].push_back(
                    shuffled[static_cast<std::size_t>(c)][cursor[static_cast<std::size_t>(c)]++]);
            }
        }
    }
    return assignment;
}

std::string SimilarityReport::to_json() const {
    nlohmann::json j;
    j["gamma_G2"] = gamma_G2;
    j["gamma_H2"] = gamma_H2;
    j["tv"] = tv;
    j["w1"] = w1;
    j["tv_bound_G2"] = tv_bound_G2;
    j["tv_bound_H2"] = tv_bound_H2;
    j["w1_bound_G2"] = w1_bound_G2;
    j["w1_bound_H2"] = w1_bound_H2;
    return j.dump(2);
}

std::string partition_csv(const std::vector<std::vector<int>>& assignment) {
    std::ostringstream out;
    out << "user_id,sample_index\n";
    for (std::size_t u = 0; u < assignment.size(); ++u)
        for (int s : assignment[u]) out << u << ',' << s << '\n';
    return out.str();
}

}  // namespace pfl
