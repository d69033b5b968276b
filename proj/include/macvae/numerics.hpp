#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "macvae/errors.hpp"
#include "macvae/rng.hpp"

namespace macvae {

using Vec = std::vector<double>;

constexpr double kLogvarMin = -10.0;
constexpr double kLogvarMax = 10.0;

struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    Vec data;  // row-major

    DenseMatrix() = default;
    DenseMatrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Posterior (or prior) parameters of a diagonal Gaussian. logvar is clamped
// to [-10, 10] on construction.
struct GaussianParams {
    Vec mean;
    Vec logvar;

    GaussianParams() = default;
    GaussianParams(Vec mu, Vec lv) : mean(std::move(mu)), logvar(std::move(lv)) {
        if (mean.size() != logvar.size())
            throw ConfigError("GaussianParams: mean/logvar length mismatch");
        for (auto& x : logvar) x = std::min(kLogvarMax, std::max(kLogvarMin, x));
    }

    std::size_t dim() const { return mean.size(); }
};

enum class Activation { Tanh, Relu, Sigmoid };
enum class OutputHeads { Single, MeanAndLogvar };

// Layer widths include input and output; with MeanAndLogvar heads the final
// width is emitted twice through duplicated linear heads sharing all earlier
// layers. Hidden activations apply between layers, final layer is linear.
struct MLPSpec {
    std::vector<int> layer_widths;
    Activation hidden_activation = Activation::Tanh;
    OutputHeads output_heads = OutputHeads::Single;

    void validate() const {
        if (layer_widths.size() < 2) throw ConfigError("MLPSpec: need at least 2 layers");
        for (int w : layer_widths)
            if (w <= 0) throw ConfigError("MLPSpec: widths must be positive");
    }
    int input_width() const { return layer_widths.front(); }
    int output_width() const { return layer_widths.back(); }
};

// Named parameter slots with matching gradient accumulators and Adam moments.
class ParameterStore {
public:
    struct Slot {
        int rows = 0, cols = 0;  // cols == 1 for bias vectors
        Vec value, grad, m, v;
    };

    void add(const std::string& name, int rows, int cols) {
        Slot s;
        s.rows = rows;
        s.cols = cols;
        std::size_t n = static_cast<std::size_t>(rows) * cols;
        s.value.assign(n, 0.0);
        s.grad.assign(n, 0.0);
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        slots_[name] = std::move(s);
    }

    bool has(const std::string& name) const { return slots_.count(name) != 0; }

    Slot& slot(const std::string& name) {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw ConfigError("ParameterStore: unknown slot " + name);
        return it->second;
    }
    const Slot& slot(const std::string& name) const {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw ConfigError("ParameterStore: unknown slot " + name);
        return it->second;
    }

    Vec& value(const std::string& name) { return slot(name).value; }
    const Vec& value(const std::string& name) const { return slot(name).value; }
    Vec& grad(const std::string& name) { return slot(name).grad; }

    void zero_grad() {
        for (auto& [_, s] : slots_) std::fill(s.grad.begin(), s.grad.end(), 0.0);
    }

    // Glorot-uniform weights, zero biases.
    void init_uniform(Rng& rng) {
        for (auto& [name, s] : slots_) {
            if (s.cols == 1) continue;  // bias
            double bound = std::sqrt(6.0 / (s.rows + s.cols));
            for (auto& x : s.value) x = rng.uniform(-bound, bound);
        }
    }

    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++step_;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (auto& [_, s] : slots_) {
            for (std::size_t i = 0; i < s.value.size(); ++i) {
                double g = s.grad[i];
                s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g;
                s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g * g;
                s.value[i] -= lr * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + eps);
            }
        }
    }

    const std::map<std::string, Slot>& slots() const { return slots_; }
    std::map<std::string, Slot>& slots_mut() { return slots_; }
    std::int64_t step() const { return step_; }
    void set_step(std::int64_t s) { step_ = s; }

private:
    std::map<std::string, Slot> slots_;  // ordered: deterministic iteration
    std::int64_t step_ = 0;
};

// ---- basic ops ------------------------------------------------------------

// Log-softmax with max subtraction.
Vec softmax_log(const Vec& logits);

// KL(N(mu, e^logvar) || N(0, I)).
double gaussian_kl(const GaussianParams& q);

// mu + noise .* exp(logvar / 2).
Vec reparameterize(const GaussianParams& q, const Vec& noise);

double l2_norm(const Vec& v);
void l2_normalize(Vec& v);  // leaves the zero vector unchanged

// Sparse row (index, weight) times dense matrix rows: out = sum_i w_i * M[row i].
// Dedicated kernel so the data layer can stay sparse while the core is dense.
Vec sparse_row_matvec(const std::vector<std::pair<int, double>>& row, const DenseMatrix& m);

// ---- MLP ------------------------------------------------------------------

// Register the slots an MLP needs under `prefix`: prefix.L1.W, prefix.L1.b, ...
// With MeanAndLogvar heads the last layer becomes prefix.mu.{W,b} and
// prefix.lv.{W,b}.
void register_mlp(ParameterStore& store, const std::string& prefix, const MLPSpec& spec);

// Forward pass retaining every layer's activations (input first). For
// MeanAndLogvar heads the last two entries are mean then logvar (unclamped).
std::vector<Vec> mlp_forward(const Vec& input, const MLPSpec& spec, const ParameterStore& store,
                             const std::string& prefix);

// Convenience: run a MeanAndLogvar MLP and wrap the heads (logvar clamped).
GaussianParams mlp_gaussian(const Vec& input, const MLPSpec& spec, const ParameterStore& store,
                            const std::string& prefix);

double apply_activation(Activation a, double x);

}  // namespace macvae
