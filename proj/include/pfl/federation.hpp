#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "pfl/metagrad.hpp"
#include "pfl/quadratic.hpp"

namespace pfl {

enum class Algorithm { PerFedAvg, FedAvg };
enum class BetaSchedule { Constant, Diminishing };

struct FederationConfig {
    int n = 2;
    double r = 1.0;      // participation fraction; active set size round(r n), floor 1
    int tau = 1;         // local steps per round
    int rounds = 1;      // K
    double beta = 0.01;  // outer stepsize (round 0 for the diminishing schedule)
    BetaSchedule schedule = BetaSchedule::Constant;
    MetaEstimator estimator;
    Algorithm algorithm = Algorithm::PerFedAvg;
    std::uint64_t seed = 0;

    bool trace_all_clients = false;   // materialize all-n local sequences for drift stats
    bool record_stationarity = true;  // telemetry only, never fed back into training
    int workers = 0;                  // 0 = PFL_WORKERS env or 1

    // When known, the constant schedule must respect beta <= 1/(10 tau L_F).
    std::optional<double> L_F;

    void validate() const;
    int active_count() const;
    double beta_at(int k) const;  // diminishing: beta_k = c/sqrt(tau(k+1)), c = beta sqrt(tau)
};

struct DriftStats {
    std::vector<double> mean_norm;     // (1/n) sum |w_i - wbar| per local step t
    std::vector<double> mean_sq_norm;  // (1/n) sum |w_i - wbar|^2 per local step t
};

struct RoundRecord {
    int k = 0;
    std::vector<int> active;
    int t_report = 0;
    Vec w_next;                       // server model after averaging
    std::vector<Vec> avg_iterates;    // wbar_{k+1,t} over active clients, t = 0..tau
    std::vector<double> stationarity; // |grad F(wbar_{k+1,t})|^2 for t = 0..tau-1 (optional)
    DriftStats drift;                 // filled when all-n traces are enabled
};

struct TrainingResult {
    std::vector<RoundRecord> rounds;
    Vec final_model;
};

// exact full-federation quantities (telemetry / oracles)
double average_meta_loss(const std::vector<ModelPtr>& models, const Vec& w, double alpha);
Vec average_meta_grad(const std::vector<ModelPtr>& models, const Vec& w, double alpha);

int pick_report_index(int tau, RngStream& rng);

RoundRecord run_round(const Vec& w_k, const std::vector<ModelPtr>& models,
                      const FederationConfig& cfg, int k);

TrainingResult run_training(const std::vector<ModelPtr>& models, const FederationConfig& cfg,
                            const Vec& w0);

// one stochastic adaptation step on the user's own data at test time
Vec personalize(const LossModel& model, const Vec& w_final, double alpha,
                const Batch& test_batch);

// stationary point of F for noiseless quadratic tasks, via the affine system
// (1/n) sum (I - aA_i) A_i (I - aA_i) w = -(1/n) sum (I - aA_i)^2 b_i
Vec minimize_F_closed_form(const std::vector<std::shared_ptr<QuadraticTask>>& tasks,
                           double alpha);

}  // namespace pfl
