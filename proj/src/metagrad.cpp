#include "pfl/metagrad.hpp"

#include <cmath>
#include <stdexcept>

namespace pfl {

const char* estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::Exact: return "exact";
        case EstimatorKind::Stochastic: return "stochastic";
        case EstimatorKind::FO: return "fo";
        case EstimatorKind::HF: return "hf";
    }
    return "?";
}

void MetaEstimator::validate(double L_known) const {
    if (alpha < 0.0) throw std::invalid_argument("MetaEstimator: alpha must be >= 0");
    if (L_known > 0.0 && alpha * L_known > 1.0 + 1e-12) {
        throw std::invalid_argument("MetaEstimator: alpha*L <= 1 required");
    }
    if (kind != EstimatorKind::Exact) {
        if (batch_d < 1 || batch_d1 < 1)
            throw std::invalid_argument("MetaEstimator: batch sizes D, D' must be >= 1");
        if ((kind == EstimatorKind::Stochastic || kind == EstimatorKind::HF) && batch_d2 < 1)
            throw std::invalid_argument("MetaEstimator: batch size D'' must be >= 1");
    }
}

double meta_loss(const LossModel& model, const Vec& w, double alpha) {
    if (!model.has_exact())
        throw UnsupportedOperation("meta_loss: model has no exact gradient path");
    Vec inner = w;
    axpy(-alpha, model.exact_grad(w), inner);
    return model.exact_loss(inner);
}

Vec meta_grad_exact(const LossModel& model, const Vec& w, double alpha) {
    if (!model.has_exact())
        throw UnsupportedOperation("meta_grad_exact: model has no exact gradient path");
    Vec inner = w;
    axpy(-alpha, model.exact_grad(w), inner);
    Vec g_out = model.exact_grad(inner);
    Vec result = g_out;
    if (alpha != 0.0) axpy(-alpha, model.exact_hvp(w, g_out), result);
    ensure_finite(result, "meta_grad_exact");
    return result;
}

namespace {
// shared first stage: draw D, estimate the inner gradient, adapt, then the
// D' gradient at the adapted point
struct TwoStage {
    Vec inner_point;
    Vec g_outer;
};

TwoStage two_stage(const LossModel& model, const Vec& w, const MetaEstimator& est,
                   const RngPath& path) {
    RngStream rng_in = path.stream(Purpose::InnerGrad);
    RngStream rng_out = path.stream(Purpose::OuterGrad);
    const Batch d0 = draw_batch(model, static_cast<std::size_t>(est.batch_d), rng_in);
    TwoStage st;
    st.inner_point = w;
    axpy(-est.alpha, batch_grad(model, w, d0), st.inner_point);
    const Batch d1 = draw_batch(model, static_cast<std::size_t>(est.batch_d1), rng_out);
    st.g_outer = batch_grad(model, st.inner_point, d1);
    return st;
}
}  // namespace

MetaGradSample meta_grad_stochastic(const LossModel& model, const Vec& w,
                                    const MetaEstimator& est, const RngPath& path) {
    if (est.kind != EstimatorKind::Stochastic)
        throw std::invalid_argument("meta_grad_stochastic: estimator kind mismatch");
    est.validate();
    TwoStage st = two_stage(model, w, est, path);
    RngStream rng_h = path.stream(Purpose::HessianBatch);
    const Batch d2 = draw_batch(model, static_cast<std::size_t>(est.batch_d2), rng_h);
    MetaGradSample out;
    out.value = st.g_outer;
    axpy(-est.alpha, batch_hvp(model, w, st.g_outer, d2), out.value);
    out.inner_point = std::move(st.inner_point);
    ensure_finite(out.value, "meta_grad_stochastic");
    return out;
}

MetaGradSample meta_grad_fo(const LossModel& model, const Vec& w, const MetaEstimator& est,
                            const RngPath& path) {
    if (est.kind != EstimatorKind::FO)
        throw std::invalid_argument("meta_grad_fo: estimator kind mismatch");
    est.validate();
    TwoStage st = two_stage(model, w, est, path);
    MetaGradSample out;
    out.value = std::move(st.g_outer);
    out.inner_point = std::move(st.inner_point);
    ensure_finite(out.value, "meta_grad_fo");
    return out;
}

MetaGradSample meta_grad_hf(const LossModel& model, const Vec& w, const MetaEstimator& est,
                            const RngPath& path) {
    if (est.kind != EstimatorKind::HF)
        throw std::invalid_argument("meta_grad_hf: estimator kind mismatch");
    est.validate();
    if (est.delta == 0.0 || (est.delta < 0.0 && est.delta != -1.0))
        throw std::invalid_argument("meta_grad_hf: delta must be positive (or -1 for default)");

    TwoStage st = two_stage(model, w, est, path);
    const Vec& g = st.g_outer;
    double delta = est.delta;
    if (delta < 0.0) delta = 1e-3 / std::max(1.0, norm(g));

    // symmetric gradient difference on one shared D'' batch
    RngStream rng_h = path.stream(Purpose::HessianBatch);
    const Batch d2 = draw_batch(model, static_cast<std::size_t>(est.batch_d2), rng_h);
    Vec wp = w, wm = w;
    axpy(delta, g, wp);
    axpy(-delta, g, wm);
    Vec diff = batch_grad(model, wp, d2);
    axpy(-1.0, batch_grad(model, wm, d2), diff);
    scale(diff, 1.0 / (2.0 * delta));

    MetaGradSample out;
    out.value = g;
    axpy(-est.alpha, diff, out.value);
    out.inner_point = std::move(st.inner_point);
    ensure_finite(out.value, "meta_grad_hf");
    return out;
}

MetaGradSample meta_grad(const LossModel& model, const Vec& w, const MetaEstimator& est,
                         const RngPath& path) {
    switch (est.kind) {
        case EstimatorKind::Exact: {
            MetaGradSample out;
            out.value = meta_grad_exact(model, w, est.alpha);
            out.inner_point = w;
            axpy(-est.alpha, model.exact_grad(w), out.inner_point);
            return out;
        }
        case EstimatorKind::Stochastic:
            return meta_grad_stochastic(model, w, est, path);
        case EstimatorKind::FO:
            return meta_grad_fo(model, w, est, path);
        case EstimatorKind::HF:
            return meta_grad_hf(model, w, est, path);
    }
    throw std::logic_error("meta_grad: unknown estimator kind");
}

Vec local_update_step(const LossModel& model, const Vec& w, const MetaEstimator& est,
                      double beta, const RngPath& path) {
    if (beta < 0.0) throw std::invalid_argument("local_update_step: beta must be >= 0");
    const MetaGradSample sample = meta_grad(model, w, est, path);
    Vec next = w;
    axpy(-beta, sample.value, next);
    ensure_finite(next, "local_update_step");
    return next;
}

Vec fedavg_local_step(const LossModel& model, const Vec& w, double beta, int batch_size,
                      const RngPath& path) {
    if (beta < 0.0) throw std::invalid_argument("fedavg_local_step: beta must be >= 0");
    RngStream rng = path.stream(Purpose::InnerGrad);
    const Batch d0 = draw_batch(model, static_cast<std::size_t>(batch_size), rng);
    Vec next = w;
    axpy(-beta, batch_grad(model, w, d0), next);
    ensure_finite(next, "fedavg_local_step");
    return next;
}

}  // namespace pfl
