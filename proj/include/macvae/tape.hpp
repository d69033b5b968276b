#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "macvae/numerics.hpp"

namespace macvae {

// Reverse-mode autodiff over vector-valued nodes. The op set is exactly what
// the three objectives need: affine layers, elementwise activations,
// log-softmax, Gaussian KL, reparameterization with externally supplied
// noise, dot products, squared-error terms, log-sigmoid, means and clamps.
//
// Parameters enter as leaves bound to ParameterStore slots; backward()
// accumulates into the slot gradient buffers. A tape is single-use: build the
// loss, call backward once.
class Tape {
public:
    using Id = int;

    Id constant(Vec v, const char* op = "const");
    Id param(ParameterStore& store, const std::string& name);

    // y = W x + b where W is a (rows x cols) slot viewed row-major.
    Id affine(Id w, Id b, Id x, int rows, int cols);
    Id activation(Id x, Activation a);
    Id softmax_log(Id logits);
    Id clamp(Id x, double lo, double hi);  // zero gradient outside [lo, hi]

    // scalar = KL(N(mu, e^logvar) || N(0, I)); logvar clamped internally.
    Id gaussian_kl(Id mu, Id logvar);
    // y = mu + noise .* exp(logvar / 2); logvar clamped internally.
    Id reparameterize(Id mu, Id logvar, const Vec& noise);

    Id dot(Id a, Id b);                        // scalar
    Id sq_norm_diff(Id a, const Vec& target);  // scalar ||a - target||^2
    Id weighted_nll(Id logp, const Vec& weights);  // scalar -sum w_j logp_j
    Id log_sigmoid(Id scalar);
    Id sub(Id a, Id b);  // elementwise a - b
    Id mean_of(const std::vector<Id>& xs);  // elementwise mean
    Id concat(Id a, Id b);

    // scalar = sum_i coeff_i * scalar_i
    Id weighted_sum(const std::vector<Id>& scalars, const std::vector<double>& coeffs);

    const Vec& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    double scalar(Id id) const;

    // Backpropagate from a scalar root into parameter slots. Throws
    // NumericalError naming the producing op if the loss is non-finite.
    void backward(Id root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Vec val;
        Vec grad;
        const char* op;
        std::function<void(Tape&, const Node&)> back;  // null for leaves
        ParameterStore* store = nullptr;               // param leaves only
        std::string slot_name;
    };

    Id push(Vec val, const char* op, std::function<void(Tape&, const Node&)> back = nullptr);
    Node& node(Id id) { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
    std::unordered_map<std::string, Id> param_cache_;  // slot names are globally unique
};

// Build an MLP forward pass on the tape; parameters come from `store` under
// `prefix` using the register_mlp layout. Returns the final (linear) output
// id, or for MeanAndLogvar heads the (mu, logvar) pair via out params.
Tape::Id tape_mlp(Tape& t, Tape::Id input, const MLPSpec& spec, ParameterStore& store,
                  const std::string& prefix);
std::pair<Tape::Id, Tape::Id> tape_mlp_gaussian(Tape& t, Tape::Id input, const MLPSpec& spec,
                                                ParameterStore& store, const std::string& prefix);

// Zero grads, build a scalar loss with `build`, backprop, return the loss.
double loss_and_grad(const std::function<Tape::Id(Tape&)>& build, ParameterStore& store);

}  // namespace macvae
