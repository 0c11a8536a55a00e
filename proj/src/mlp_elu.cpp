#include "pfl/mlp_elu.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pfl {

namespace {
inline double elu(double x) { return x > 0 ? x : std::expm1(x); }
inline double elu_d1(double x) { return x > 0 ? 1.0 : std::exp(x); }
inline double elu_d2(double x) { return x > 0 ? 0.0 : std::exp(x); }
}  // namespace

struct MlpEluModel::Trace {
    std::vector<std::vector<double>> a;  // activations, a[0] = input
    std::vector<std::vector<double>> z;  // pre-activations, z[l] feeds layer l+1
    std::vector<double> p;               // softmax probabilities
    double loss = 0.0;
};

MlpEluModel::MlpEluModel(std::vector<int> widths, std::vector<Sample> dataset)
    : widths_(std::move(widths)), dataset_(std::move(dataset)) {
    if (widths_.size() < 2) throw std::invalid_argument("MlpEluModel: need at least 2 layers");
    for (int wth : widths_)
        if (wth < 1) throw std::invalid_argument("MlpEluModel: layer widths must be positive");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        w_offset_.push_back(n_params_);
        n_params_ += widths_[l] * widths_[l + 1];
        b_offset_.push_back(n_params_);
        n_params_ += widths_[l + 1];
    }
    for (const Sample& s : dataset_) check_sample(s);
}

void MlpEluModel::check_sample(const Sample& s) const {
    if (static_cast<int>(s.x.size()) != widths_.front()) {
        throw std::invalid_argument("MlpEluModel: feature dimension mismatch");
    }
    if (s.label < 0 || s.label >= widths_.back()) {
        throw std::invalid_argument("MlpEluModel: label out of range");
    }
}

void MlpEluModel::forward(const Sample& s, const Vec& w, Trace& tr) const {
    check_sample(s);
    if (static_cast<int>(w.size()) != n_params_)
        throw std::invalid_argument("MlpEluModel: parameter dimension mismatch");
    const int L = static_cast<int>(widths_.size()) - 1;
    tr.a.assign(static_cast<std::size_t>(L + 1), {});
    tr.z.assign(static_cast<std::size_t>(L), {});
    tr.a[0] = s.x;
    for (int l = 0; l < L; ++l) {
        const int in = widths_[l], out = widths_[l + 1];
        const double* W = w.data() + w_offset_[l];
        const double* c = w.data() + b_offset_[l];
        std::vector<double>& z = tr.z[l];
        z.assign(static_cast<std::size_t>(out), 0.0);
        for (int i = 0; i < out; ++i) {
            double acc = c[i];
            const double* row = W + static_cast<std::ptrdiff_t>(i) * in;
            const std::vector<double>& prev = tr.a[l];
            for (int j = 0; j < in; ++j) acc += row[j] * prev[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(i)] = acc;
        }
        std::vector<double>& act = tr.a[l + 1];
        act.resize(static_cast<std::size_t>(out));
        if (l + 1 < L) {
            for (int i = 0; i < out; ++i) act[i] = elu(z[i]);
        } else {
            act = z;  // linear logits
        }
    }
    // stable softmax cross-entropy
    const std::vector<double>& logits = tr.a.back();
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    tr.p.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        tr.p[i] = std::exp(logits[i] - zmax);
        sum += tr.p[i];
    }
    for (double& v : tr.p) v /= sum;
    tr.loss = std::log(sum) + zmax - logits[static_cast<std::size_t>(s.label)];
}

double MlpEluModel::loss(const Sample& s, const Vec& w) const {
    Trace tr;
    forward(s, w, tr);
    return tr.loss;
}

Vec MlpEluModel::grad_sample(const Sample& s, const Vec& w) const {
    Trace tr;
    forward(s, w, tr);
    const int L = static_cast<int>(widths_.size()) - 1;
    Vec g = zeros(w.size());

    std::vector<double> delta = tr.p;  // dLoss/dlogits = p - e_y
    delta[static_cast<std::size_t>(s.label)] -= 1.0;

    for (int l = L - 1; l >= 0; --l) {
        const int in = widths_[l], out = widths_[l + 1];
        double* gW = g.data() + w_offset_[l];
        double* gc = g.data() + b_offset_[l];
        const std::vector<double>& prev = tr.a[static_cast<std::size_t>(l)];
        for (int i = 0; i < out; ++i) {
            gc[i] = delta[static_cast<std::size_t>(i)];
            double* row = gW + static_cast<std::ptrdiff_t>(i) * in;
            for (int j = 0; j < in; ++j) row[j] = delta[static_cast<std::size_t>(i)] * prev[static_cast<std::size_t>(j)];
        }
        if (l > 0) {
            const double* W = w.data() + w_offset_[l];
            std::vector<double> below(static_cast<std::size_t>(in), 0.0);
            for (int i = 0; i < out; ++i) {
                const double* row = W + static_cast<std::ptrdiff_t>(i) * in;
                for (int j = 0; j < in; ++j) below[static_cast<std::size_t>(j)] += row[j] * delta[static_cast<std::size_t>(i)];
            }
            const std::vector<double>& z = tr.z[static_cast<std::size_t>(l - 1)];
            for (int j = 0; j < in; ++j) below[static_cast<std::size_t>(j)] *= elu_d1(z[static_cast<std::size_t>(j)]);
            delta = std::move(below);
        }
    }
    return g;
}

// Exact HVP: forward-mode tangents threaded through the forward pass and the
// backprop recursion. Tangent direction v shares the parameter layout of w.
Vec MlpEluModel::hvp_sample(const Sample& s, const Vec& w, const Vec& v) const {
    check_same_dim(w, v, "MlpEluModel::hvp_sample");
    Trace tr;
    forward(s, w, tr);
    const int L = static_cast<int>(widths_.size()) - 1;

    // forward tangents
    std::vector<std::vector<double>> da(static_cast<std::size_t>(L + 1));
    std::vector<std::vector<double>> dz(static_cast<std::size_t>(L));
    da[0].assign(s.x.size(), 0.0);
    for (int l = 0; l < L; ++l) {
        const int in = widths_[l], out = widths_[l + 1];
        const double* W = w.data() + w_offset_[l];
        const double* dW = v.data() + w_offset_[l];
        const double* dc = v.data() + b_offset_[l];
        std::vector<double>& t = dz[static_cast<std::size_t>(l)];
        t.assign(static_cast<std::size_t>(out), 0.0);
        for (int i = 0; i < out; ++i) {
            double acc = dc[i];
            const double* row = W + static_cast<std::ptrdiff_t>(i) * in;
            const double* drow = dW + static_cast<std::ptrdiff_t>(i) * in;
            for (int j = 0; j < in; ++j) {
                acc += drow[j] * tr.a[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] +
                       row[j] * da[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
            }
            t[static_cast<std::size_t>(i)] = acc;
        }
        std::vector<double>& dact = da[static_cast<std::size_t>(l + 1)];
        dact.resize(static_cast<std::size_t>(out));
        if (l + 1 < L) {
            const std::vector<double>& z = tr.z[static_cast<std::size_t>(l)];
            for (int i = 0; i < out; ++i) dact[i] = elu_d1(z[i]) * t[i];
        } else {
            dact = t;
        }
    }

    // backward pass with tangents
    std::vector<double> delta = tr.p;
    delta[static_cast<std::size_t>(s.label)] -= 1.0;
    // d(p)/dlogits applied to logit tangent: p o t - p (p . t)
    std::vector<double> ddelta(tr.p.size());
    {
        const std::vector<double>& t = da[static_cast<std::size_t>(L)];
        double pt = 0.0;
        for (std::size_t i = 0; i < tr.p.size(); ++i) pt += tr.p[i] * t[i];
        for (std::size_t i = 0; i < tr.p.size(); ++i) ddelta[i] = tr.p[i] * (t[i] - pt);
    }

    Vec h = zeros(w.size());
    for (int l = L - 1; l >= 0; --l) {
        const int in = widths_[l], out = widths_[l + 1];
        double* hW = h.data() + w_offset_[l];
        double* hc = h.data() + b_offset_[l];
        const std::vector<double>& prev = tr.a[static_cast<std::size_t>(l)];
        const std::vector<double>& dprev = da[static_cast<std::size_t>(l)];
        for (int i = 0; i < out; ++i) {
            hc[i] = ddelta[static_cast<std::size_t>(i)];
            double* row = hW + static_cast<std::ptrdiff_t>(i) * in;
            for (int j = 0; j < in; ++j) {
                row[j] = ddelta[static_cast<std::size_t>(i)] * prev[static_cast<std::size_t>(j)] +
                         delta[static_cast<std::size_t>(i)] * dprev[static_cast<std::size_t>(j)];
            }
        }
        if (l > 0) {
            const double* W = w.data() + w_offset_[l];
            const double* dW = v.data() + w_offset_[l];
            std::vector<double> lower(static_cast<std::size_t>(in), 0.0);
            std::vector<double> dlower(static_cast<std::size_t>(in), 0.0);
            for (int i = 0; i < out; ++i) {
                const double* row = W + static_cast<std::ptrdiff_t>(i) * in;
                const double* drow = dW + static_cast<std::ptrdiff_t>(i) * in;
                const double di = delta[static_cast<std::size_t>(i)];
                const double ddi = ddelta[static_cast<std::size_t>(i)];
                for (int j = 0; j < in; ++j) {
                    lower[static_cast<std::size_t>(j)] += row[j] * di;
                    dlower[static_cast<std::size_t>(j)] += drow[j] * di + row[j] * ddi;
                }
            }
            const std::vector<double>& z = tr.z[static_cast<std::size_t>(l - 1)];
            const std::vector<double>& zt = dz[static_cast<std::size_t>(l - 1)];
            std::vector<double> nd(static_cast<std::size_t>(in));
            std::vector<double> ndd(static_cast<std::size_t>(in));
            for (int j = 0; j < in; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                nd[ju] = elu_d1(z[ju]) * lower[ju];
                ndd[ju] = elu_d2(z[ju]) * zt[ju] * lower[ju] + elu_d1(z[ju]) * dlower[ju];
            }
            delta = std::move(nd);
            ddelta = std::move(ndd);
        }
    }
    return h;
}

Sample MlpEluModel::draw_sample(RngStream& rng) const {
    if (dataset_.empty()) throw DataError("MlpEluModel: empty dataset");
    return dataset_[static_cast<std::size_t>(rng.below(dataset_.size()))];
}

double MlpEluModel::exact_loss(const Vec& w) const {
    if (dataset_.empty()) throw UnsupportedOperation("MlpEluModel: no dataset for exact_loss");
    double acc = 0.0;
    for (const Sample& s : dataset_) acc += loss(s, w);
    return acc / static_cast<double>(dataset_.size());
}

Vec MlpEluModel::exact_grad(const Vec& w) const {
    if (dataset_.empty()) throw UnsupportedOperation("MlpEluModel: no dataset for exact_grad");
    Vec g = zeros(w.size());
    const double inv = 1.0 / static_cast<double>(dataset_.size());
    for (const Sample& s : dataset_) axpy(inv, grad_sample(s, w), g);
    return g;
}

Vec MlpEluModel::exact_hvp(const Vec& w, const Vec& v) const {
    if (dataset_.empty()) throw UnsupportedOperation("MlpEluModel: no dataset for exact_hvp");
    Vec h = zeros(w.size());
    const double inv = 1.0 / static_cast<double>(dataset_.size());
    for (const Sample& s : dataset_) axpy(inv, hvp_sample(s, w, v), h);
    return h;
}

Vec MlpEluModel::init_weights(RngStream& rng) const {
    Vec w = zeros(static_cast<std::size_t>(n_params_));
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const int in = widths_[l], out = widths_[l + 1];
        const double bound = std::sqrt(6.0 / (in + out));
        double* W = w.data() + w_offset_[l];
        for (int i = 0; i < in * out; ++i) W[i] = bound * (2.0 * rng.uniform() - 1.0);
        // biases stay zero
    }
    return w;
}

int MlpEluModel::predict(const Sample& s, const Vec& w) const {
    Trace tr;
    forward(s, w, tr);
    return static_cast<int>(std::max_element(tr.p.begin(), tr.p.end()) - tr.p.begin());
}

double MlpEluModel::accuracy(const Vec& w, const std::vector<Sample>& samples) const {
    if (samples.empty()) return 0.0;
    int hit = 0;
    for (const Sample& s : samples)
        if (predict(s, w) == s.label) ++hit;
    return static_cast<double>(hit) / static_cast<double>(samples.size());
}

}  // namespace pfl
