#pragma once

#include <vector>

#include "pfl/loss_model.hpp"

namespace pfl {

// Fully connected classifier with ELU hidden activations and softmax
// cross-entropy loss. Weights and biases live flattened in one ParamVector:
// per layer, the (out x in) weight matrix row-major, then the bias.
//
// The per-sample Hessian-vector product is exact (forward-mode tangent
// through the forward and backward passes), so batch_hvp is symmetric to
// rounding. "Exact" oracles average over the model's finite dataset.
class MlpEluModel : public LossModel {
public:
    MlpEluModel(std::vector<int> widths, std::vector<Sample> dataset);

    int dim() const override { return n_params_; }

    double loss(const Sample& s, const Vec& w) const override;
    Vec grad_sample(const Sample& s, const Vec& w) const override;
    Vec hvp_sample(const Sample& s, const Vec& w, const Vec& v) const override;
    Sample draw_sample(RngStream& rng) const override;

    bool has_exact() const override { return !dataset_.empty(); }
    double exact_loss(const Vec& w) const override;
    Vec exact_grad(const Vec& w) const override;
    Vec exact_hvp(const Vec& w, const Vec& v) const override;

    // Glorot-uniform weights, zero biases
    Vec init_weights(RngStream& rng) const;

    int predict(const Sample& s, const Vec& w) const;
    double accuracy(const Vec& w, const std::vector<Sample>& samples) const;

    const std::vector<int>& widths() const { return widths_; }
    const std::vector<Sample>& dataset() const { return dataset_; }

private:
    struct Trace;  // per-sample forward/backward state

    void forward(const Sample& s, const Vec& w, Trace& tr) const;
    void check_sample(const Sample& s) const;

    std::vector<int> widths_;
    std::vector<int> w_offset_;  // weight block start per layer
    std::vector<int> b_offset_;  // bias block start per layer
    int n_params_ = 0;
    std::vector<Sample> dataset_;
};

}  // namespace pfl
