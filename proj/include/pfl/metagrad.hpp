#pragma once

#include "pfl/loss_model.hpp"
#include "pfl/rng.hpp"

namespace pfl {

enum class EstimatorKind { Exact, Stochastic, FO, HF };

const char* estimator_name(EstimatorKind k);

// Configuration of one meta-gradient estimator. alpha is the inner
// (adaptation) stepsize; the batch sizes are (D, D', D''); delta is the
// probe scale of the Hessian-free gradient difference (HF only; <= 0 means
// the adaptive default 1e-3 / max(1, |g|)).
struct MetaEstimator {
    EstimatorKind kind = EstimatorKind::Exact;
    double alpha = 0.0;
    int batch_d = 1;
    int batch_d1 = 1;
    int batch_d2 = 1;
    double delta = -1.0;

    void validate(double L_known = -1.0) const;
};

// One estimate of the meta-gradient, with the adapted inner point for
// two-stage consumers.
struct MetaGradSample {
    Vec value;        // estimate of grad F_i(w)
    Vec inner_point;  // w - alpha * (inner gradient used inside value)
};

// F_i(w) = f_i(w - alpha grad f_i(w)); needs the exact oracle path.
double meta_loss(const LossModel& model, const Vec& w, double alpha);

// grad F_i(w) = (I - alpha H_i(w)) grad f_i(w - alpha grad f_i(w)),
// matrix-free: one gradient, one inner gradient, one HVP.
Vec meta_grad_exact(const LossModel& model, const Vec& w, double alpha);

// Three-batch estimator: independent batches D, D', D'' drawn from the
// inner-grad / outer-grad / hessian RNG purposes of the given path.
MetaGradSample meta_grad_stochastic(const LossModel& model, const Vec& w,
                                    const MetaEstimator& est, const RngPath& path);

// First-order variant: the Hessian factor is dropped, no D'' batch drawn.
MetaGradSample meta_grad_fo(const LossModel& model, const Vec& w,
                            const MetaEstimator& est, const RngPath& path);

// Hessian-free variant: the HVP is replaced by a symmetric gradient
// difference at w +- delta g on batch D''.
MetaGradSample meta_grad_hf(const LossModel& model, const Vec& w,
                            const MetaEstimator& est, const RngPath& path);

// dispatch on est.kind
MetaGradSample meta_grad(const LossModel& model, const Vec& w, const MetaEstimator& est,
                         const RngPath& path);

// w - beta * estimate(w)
Vec local_update_step(const LossModel& model, const Vec& w, const MetaEstimator& est,
                      double beta, const RngPath& path);

// plain local SGD step w - beta * batch_grad(w, D); no meta structure
Vec fedavg_local_step(const LossModel& model, const Vec& w, double beta, int batch_size,
                      const RngPath& path);

}  // namespace pfl
