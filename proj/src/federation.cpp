#include "pfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "pfl/sampling.hpp"

namespace pfl {

void FederationConfig::validate() const {
    if (n < 1) throw std::invalid_argument("FederationConfig: n >= 1 required");
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("FederationConfig: r in (0,1] required");
    if (tau < 1) throw std::invalid_argument("FederationConfig: tau >= 1 required");
    if (rounds < 1) throw std::invalid_argument("FederationConfig: rounds >= 1 required");
    if (beta < 0.0) throw std::invalid_argument("FederationConfig: beta >= 0 required");
    if (schedule == BetaSchedule::Constant && L_F && *L_F > 0.0 &&
        beta > 1.0 / (10.0 * tau * *L_F) + 1e-15) {
        throw std::invalid_argument("FederationConfig: beta <= 1/(10 tau L_F) required");
    }
}

int FederationConfig::active_count() const {
    return std::max(1, static_cast<int>(std::lround(r * n)));
}

double FederationConfig::beta_at(int k) const {
    if (schedule == BetaSchedule::Constant) return beta;
    return beta / std::sqrt(static_cast<double>(k + 1));
}

double average_meta_loss(const std::vector<ModelPtr>& models, const Vec& w, double alpha) {
    double acc = 0.0;
    for (const ModelPtr& m : models) acc += meta_loss(*m, w, alpha);
    return acc / static_cast<double>(models.size());
}

Vec average_meta_grad(const std::vector<ModelPtr>& models, const Vec& w, double alpha) {
    Vec g = zeros(w.size());
    const double inv = 1.0 / static_cast<double>(models.size());
    for (const ModelPtr& m : models) axpy(inv, meta_grad_exact(*m, w, alpha), g);
    return g;
}

int pick_report_index(int tau, RngStream& rng) {
    if (tau < 1) throw std::invalid_argument("pick_report_index: tau >= 1 required");
    return static_cast<int>(rng.below(static_cast<std::uint64_t>(tau)));
}

namespace {

int resolve_workers(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("PFL_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// tau local updates of one client; returns iterates t = 0..tau
std::vector<Vec> client_local_run(const LossModel& model, const Vec& w_k,
                                  const FederationConfig& cfg, int k, int client) {
    std::vector<Vec> iterates;
    iterates.reserve(static_cast<std::size_t>(cfg.tau) + 1);
    iterates.push_back(w_k);
    const double beta_k = cfg.beta_at(k);
    Vec w = w_k;
    for (int t = 0; t < cfg.tau; ++t) {
        RngPath path{cfg.seed, static_cast<std::uint64_t>(k),
                     static_cast<std::uint64_t>(client), static_cast<std::uint64_t>(t)};
        if (cfg.algorithm == Algorithm::PerFedAvg) {
            w = local_update_step(model, w, cfg.estimator, beta_k, path);
        } else {
            w = fedavg_local_step(model, w, beta_k, cfg.estimator.batch_d, path);
        }
        iterates.push_back(w);
    }
    return iterates;
}

bool all_have_exact(const std::vector<ModelPtr>& models) {
    for (const ModelPtr& m : models)
        if (!m->has_exact()) return false;
    return true;
}

}  // namespace

RoundRecord run_round(const Vec& w_k, const std::vector<ModelPtr>& models,
                      const FederationConfig& cfg, int k) {
    cfg.validate();
    if (static_cast<int>(models.size()) != cfg.n)
        throw std::invalid_argument("run_round: model list size differs from cfg.n");
    for (const ModelPtr& m : models) {
        if (static_cast<std::size_t>(m->dim()) != w_k.size())
            throw std::invalid_argument("run_round: client dimension mismatch");
    }

    RoundRecord rec;
    rec.k = k;
    {
        RngPath sel{cfg.seed, static_cast<std::uint64_t>(k), 0, 0};
        RngStream rng_sel = sel.stream(Purpose::ClientSelect);
        rec.active = sample_without_replacement(cfg.n, cfg.active_count(), rng_sel);
        RngStream rng_rep = sel.stream(Purpose::ReportIndex);
        rec.t_report = pick_report_index(cfg.tau, rng_rep);
    }

    // Which clients actually run: active only, or all n when drift traces are
    // requested. Per-client RNG paths make the result independent of worker
    // count and evaluation order.
    std::vector<int> running;
    if (cfg.trace_all_clients) {
        running.resize(static_cast<std::size_t>(cfg.n));
        for (int i = 0; i < cfg.n; ++i) running[static_cast<std::size_t>(i)] = i;
    } else {
        running = rec.active;
    }

    std::vector<std::vector<Vec>> traces(running.size());
    const int workers = std::min<int>(resolve_workers(cfg.workers),
                                      static_cast<int>(running.size()));
    if (workers <= 1) {
        for (std::size_t j = 0; j < running.size(); ++j) {
            traces[j] = client_local_run(*models[static_cast<std::size_t>(running[j])], w_k, cfg, k,
                                         running[j]);
        }
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        const std::size_t total = running.size();
        const std::size_t chunk = (total + static_cast<std::size_t>(workers) - 1) /
                                  static_cast<std::size_t>(workers);
        for (int wkr = 0; wkr < workers; ++wkr) {
            const std::size_t lo = next;
            const std::size_t hi = std::min(total, lo + chunk);
            next = hi;
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::size_t j = lo; j < hi; ++j) {
                    traces[j] = client_local_run(*models[static_cast<std::size_t>(running[j])], w_k,
                                                 cfg, k, running[j]);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    // index of each active client inside `running`
    std::vector<std::size_t> active_slot;
    for (int id : rec.active) {
        const auto it = std::lower_bound(running.begin(), running.end(), id);
        active_slot.push_back(static_cast<std::size_t>(it - running.begin()));
    }

    const std::size_t d = w_k.size();
    rec.avg_iterates.assign(static_cast<std::size_t>(cfg.tau) + 1, zeros(d));
    const double inv_active = 1.0 / static_cast<double>(rec.active.size());
    for (std::size_t slot : active_slot) {
        for (int t = 0; t <= cfg.tau; ++t) {
            axpy(inv_active, traces[slot][static_cast<std::size_t>(t)],
                 rec.avg_iterates[static_cast<std::size_t>(t)]);
        }
    }
    rec.w_next = rec.avg_iterates.back();
    ensure_finite(rec.w_next, "run_round server average");

    if (cfg.trace_all_clients) {
        rec.drift.mean_norm.assign(static_cast<std::size_t>(cfg.tau) + 1, 0.0);
        rec.drift.mean_sq_norm.assign(static_cast<std::size_t>(cfg.tau) + 1, 0.0);
        Vec wbar(d);
        for (int t = 0; t <= cfg.tau; ++t) {
            std::fill(wbar.begin(), wbar.end(), 0.0);
            for (std::size_t j = 0; j < traces.size(); ++j)
                axpy(1.0 / cfg.n, traces[j][static_cast<std::size_t>(t)], wbar);
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < traces.size(); ++j) {
                const double sq = sq_dist(traces[j][static_cast<std::size_t>(t)], wbar);
                m1 += std::sqrt(sq) / cfg.n;
                m2 += sq / cfg.n;
            }
            rec.drift.mean_norm[static_cast<std::size_t>(t)] = m1;
            rec.drift.mean_sq_norm[static_cast<std::size_t>(t)] = m2;
        }
    }

    if (cfg.record_stationarity && all_have_exact(models)) {
        rec.stationarity.reserve(static_cast<std::size_t>(cfg.tau));
        for (int t = 0; t < cfg.tau; ++t) {
            const Vec g = average_meta_grad(models, rec.avg_iterates[static_cast<std::size_t>(t)],
                                            cfg.estimator.alpha);
            rec.stationarity.push_back(dot(g, g));
        }
    }
    return rec;
}

TrainingResult run_training(const std::vector<ModelPtr>& models, const FederationConfig& cfg,
                            const Vec& w0) {
    cfg.validate();
    TrainingResult result;
    result.rounds.reserve(static_cast<std::size_t>(cfg.rounds));
    Vec w = w0;
    for (int k = 0; k < cfg.rounds; ++k) {
        RoundRecord rec = run_round(w, models, cfg, k);
        w = rec.w_next;
        result.rounds.push_back(std::move(rec));
    }
    result.final_model = std::move(w);
    return result;
}

Vec personalize(const LossModel& model, const Vec& w_final, double alpha,
                const Batch& test_batch) {
    if (test_batch.empty()) throw std::invalid_argument("personalize: empty test batch");
    Vec w = w_final;
    axpy(-alpha, batch_grad(model, w_final, test_batch), w);
    return w;
}

Vec minimize_F_closed_form(const std::vector<std::shared_ptr<QuadraticTask>>& tasks,
                           double alpha) {
    if (tasks.empty()) throw std::invalid_argument("minimize_F_closed_form: no tasks");
    const Eigen::Index d = tasks.front()->b().size();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    const double inv = 1.0 / static_cast<double>(tasks.size());
    for (const auto& t : tasks) {
        const Eigen::MatrixXd J = I - alpha * t->A();
        M += inv * (J * t->A() * J);
        c += inv * (J * J * t->b());
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) {
        throw NumericError("minimize_F_closed_form: averaged coefficient matrix is singular");
    }
    const Eigen::VectorXd w = lu.solve(-c);
    return Vec(w.data(), w.data() + w.size());
}

}  // namespace pfl
