#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "pfl/errors.hpp"
#include "pfl/rng.hpp"
#include "pfl/vec.hpp"

namespace pfl {

// One data point. For dataset-backed tasks `x` and `label` carry the real
// sample and `key` is its index; analytic tasks use `key` as the seed of the
// sample's noise realization and leave `x` empty.
struct Sample {
    std::vector<double> x;
    int label = 0;
    std::uint64_t key = 0;
};

struct Batch {
    std::vector<Sample> samples;
    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

// Declared task constants; NaN means unknown. B is the gradient-norm bound
// valid inside the ball of the declared radius.
struct ModelConstants {
    double B = std::numeric_limits<double>::quiet_NaN();
    double L = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    double sigma_G = std::numeric_limits<double>::quiet_NaN();
    double sigma_H = std::numeric_limits<double>::quiet_NaN();
    double radius = std::numeric_limits<double>::quiet_NaN();
};

// A user's task: per-sample loss/gradient/Hessian-vector product plus, when
// available, exact full-distribution oracles. For finite-dataset models the
// "exact" oracles mean full-dataset evaluation.
class LossModel {
public:
    virtual ~LossModel() = default;

    virtual int dim() const = 0;

    virtual double loss(const Sample& s, const Vec& w) const = 0;
    virtual Vec grad_sample(const Sample& s, const Vec& w) const = 0;
    virtual Vec hvp_sample(const Sample& s, const Vec& w, const Vec& v) const = 0;

    // draw one sample from the task distribution p_i
    virtual Sample draw_sample(RngStream& rng) const = 0;

    virtual bool has_exact() const { return false; }
    virtual double exact_loss(const Vec&) const {
        throw UnsupportedOperation("exact_loss not available for this model");
    }
    virtual Vec exact_grad(const Vec&) const {
        throw UnsupportedOperation("exact_grad not available for this model");
    }
    virtual Vec exact_hvp(const Vec&, const Vec&) const {
        throw UnsupportedOperation("exact_hvp not available for this model");
    }

    const ModelConstants& constants() const { return constants_; }
    ModelConstants& constants() { return constants_; }

protected:
    ModelConstants constants_;
};

using ModelPtr = std::shared_ptr<LossModel>;

inline Batch draw_batch(const LossModel& model, std::size_t size, RngStream& rng) {
    if (size == 0) throw std::invalid_argument("draw_batch: batch size must be positive");
    Batch b;
    b.samples.reserve(size);
    for (std::size_t i = 0; i < size; ++i) b.samples.push_back(model.draw_sample(rng));
    return b;
}

// (1/|D|) sum of per-sample gradients; unbiased for grad f_i under i.i.d. draws.
inline Vec batch_grad(const LossModel& model, const Vec& w, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("batch_grad: empty batch");
    Vec g = zeros(w.size());
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const Sample& s : batch.samples) axpy(inv, model.grad_sample(s, w), g);
    ensure_finite(g, "batch_grad");
    return g;
}

// (1/|D''|) sum of per-sample Hessian-vector products; linear in v.
inline Vec batch_hvp(const LossModel& model, const Vec& w, const Vec& v, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("batch_hvp: empty batch");
    check_same_dim(w, v, "batch_hvp");
    Vec h = zeros(w.size());
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const Sample& s : batch.samples) axpy(inv, model.hvp_sample(s, w, v), h);
    ensure_finite(h, "batch_hvp");
    return h;
}

inline double batch_loss(const LossModel& model, const Vec& w, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    double l = 0.0;
    for (const Sample& s : batch.samples) l += model.loss(s, w);
    return l / static_cast<double>(batch.size());
}

}  // namespace pfl
