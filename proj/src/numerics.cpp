#include "macvae/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace macvae {

Vec softmax_log(const Vec& logits) {
    if (logits.empty()) throw ConfigError("softmax_log: empty input");
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double x : logits) sum += std::exp(x - mx);
    double lse = mx + std::log(sum);
    Vec out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

double gaussian_kl(const GaussianParams& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.dim(); ++i) {
        double mu = q.mean[i], lv = q.logvar[i];
        acc += 1.0 + lv - mu * mu - std::exp(lv);
    }
    return -0.5 * acc;
}

Vec reparameterize(const GaussianParams& q, const Vec& noise) {
    if (noise.size() != q.dim()) throw ConfigError("reparameterize: noise length mismatch");
    Vec out(q.dim());
    for (std::size_t i = 0; i < q.dim(); ++i)
        out[i] = q.mean[i] + noise[i] * std::exp(0.5 * q.logvar[i]);
    return out;
}

double l2_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void l2_normalize(Vec& v) {
    double n = l2_norm(v);
    if (n > 0.0)
        for (auto& x : v) x /= n;
}

Vec sparse_row_matvec(const std::vector<std::pair<int, double>>& row, const DenseMatrix& m) {
    Vec out(static_cast<std::size_t>(m.cols), 0.0);
    for (const auto& [idx, w] : row) {
        const double* src = &m.data[static_cast<std::size_t>(idx) * m.cols];
        for (int c = 0; c < m.cols; ++c) out[c] += w * src[c];
    }
    return out;
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

void register_mlp(ParameterStore& store, const std::string& prefix, const MLPSpec& spec) {
    spec.validate();
    std::size_t n = spec.layer_widths.size();
    for (std::size_t l = 1; l + 1 < n; ++l) {
        std::string base = prefix + ".L" + std::to_string(l);
        store.add(base + ".W", spec.layer_widths[l], spec.layer_widths[l - 1]);
        store.add(base + ".b", spec.layer_widths[l], 1);
    }
    int in = spec.layer_widths[n - 2], out = spec.layer_widths[n - 1];
    if (spec.output_heads == OutputHeads::Single) {
        std::string base = prefix + ".L" + std::to_string(n - 1);
        store.add(base + ".W", out, in);
        store.add(base + ".b", out, 1);
    } else {
        store.add(prefix + ".mu.W", out, in);
        store.add(prefix + ".mu.b", out, 1);
        store.add(prefix + ".lv.W", out, in);
        store.add(prefix + ".lv.b", out, 1);
    }
}

namespace {

Vec affine(const Vec& w, const Vec& b, const Vec& x, int rows, int cols) {
    Vec out(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const double* wr = &w[static_cast<std::size_t>(r) * cols];
        double acc = b[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    return out;
}

}  // namespace

std::vector<Vec> mlp_forward(const Vec& input, const MLPSpec& spec, const ParameterStore& store,
                             const std::string& prefix) {
    spec.validate();
    if (static_cast<int>(input.size()) != spec.input_width())
        throw ConfigError("mlp_forward: input width " + std::to_string(input.size()) +
                          " != first layer width " + std::to_string(spec.input_width()));
    std::vector<Vec> acts;
    acts.push_back(input);
    std::size_t n = spec.layer_widths.size();
    Vec cur = input;
    for (std::size_t l = 1; l + 1 < n; ++l) {
        std::string base = prefix + ".L" + std::to_string(l);
        const auto& w = store.slot(base + ".W");
        Vec h = affine(w.value, store.value(base + ".b"), cur, w.rows, w.cols);
        for (auto& x : h) x = apply_activation(spec.hidden_activation, x);
        acts.push_back(h);
        cur = std::move(h);
    }
    if (spec.output_heads == OutputHeads::Single) {
        std::string base = prefix + ".L" + std::to_string(n - 1);
        const auto& w = store.slot(base + ".W");
        acts.push_back(affine(w.value, store.value(base + ".b"), cur, w.rows, w.cols));
    } else {
        const auto& wm = store.slot(prefix + ".mu.W");
        acts.push_back(affine(wm.value, store.value(prefix + ".mu.b"), cur, wm.rows, wm.cols));
        const auto& wl = store.slot(prefix + ".lv.W");
        acts.push_back(affine(wl.value, store.value(prefix + ".lv.b"), cur, wl.rows, wl.cols));
    }
    return acts;
}

GaussianParams mlp_gaussian(const Vec& input, const MLPSpec& spec, const ParameterStore& store,
                            const std::string& prefix) {
    auto acts = mlp_forward(input, spec, store, prefix);
    Vec lv = acts.back();
    Vec mu = acts[acts.size() - 2];
    return GaussianParams(std::move(mu), std::move(lv));
}

}  // namespace macvae
