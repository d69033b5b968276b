#include "macvae/tape.hpp"

#include <algorithm>
#include <cmath>

namespace macvae {

Tape::Id Tape::push(Vec val, const char* op, std::function<void(Tape&, const Node&)> back) {
    Node n;
    n.val = std::move(val);
    n.grad.assign(n.val.size(), 0.0);
    n.op = op;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::constant(Vec v, const char* op) { return push(std::move(v), op); }

Tape::Id Tape::param(ParameterStore& store, const std::string& name) {
    auto it = param_cache_.find(name);
    if (it != param_cache_.end()) return it->second;
    Id id = push(store.value(name), "param");
    param_cache_[name] = id;
    node(id).store = &store;
    node(id).slot_name = name;
    return id;
}

Tape::Id Tape::affine(Id w, Id b, Id x, int rows, int cols) {
    const Vec& wv = value(w);
    const Vec& bv = value(b);
    const Vec& xv = value(x);
    if (static_cast<int>(xv.size()) != cols || static_cast<int>(wv.size()) != rows * cols ||
        static_cast<int>(bv.size()) != rows)
        throw ConfigError("affine: shape mismatch");
    Vec out(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const double* wr = &wv[static_cast<std::size_t>(r) * cols];
        double acc = bv[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols; ++c) acc += wr[c] * xv[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    return push(std::move(out), "affine", [w, b, x, rows, cols](Tape& t, const Node& n) {
        Node& wn = t.node(w);
        Node& bn = t.node(b);
        Node& xn = t.node(x);
        for (int r = 0; r < rows; ++r) {
            double g = n.grad[static_cast<std::size_t>(r)];
            if (g == 0.0) continue;
            bn.grad[static_cast<std::size_t>(r)] += g;
            double* wg = &wn.grad[static_cast<std::size_t>(r) * cols];
            const double* wv2 = &wn.val[static_cast<std::size_t>(r) * cols];
            for (int c = 0; c < cols; ++c) {
                wg[c] += g * xn.val[static_cast<std::size_t>(c)];
                xn.grad[static_cast<std::size_t>(c)] += g * wv2[c];
            }
        }
    });
}

Tape::Id Tape::activation(Id x, Activation a) {
    Vec out = value(x);
    for (auto& v : out) v = apply_activation(a, v);
    Id id = push(std::move(out), "activation", [x, a](Tape& t, const Node& n) {
        Node& xn = t.node(x);
        for (std::size_t i = 0; i < n.val.size(); ++i) {
            double d;
            switch (a) {
                case Activation::Tanh: d = 1.0 - n.val[i] * n.val[i]; break;
                case Activation::Relu: d = xn.val[i] > 0.0 ? 1.0 : 0.0; break;
                case Activation::Sigmoid: d = n.val[i] * (1.0 - n.val[i]); break;
            }
            xn.grad[i] += n.grad[i] * d;
        }
    });
    return id;
}

Tape::Id Tape::softmax_log(Id logits) {
    Vec out = macvae::softmax_log(value(logits));
    return push(std::move(out), "softmax_log", [logits](Tape& t, const Node& n) {
        Node& xn = t.node(logits);
        double gsum = 0.0;
        for (double g : n.grad) gsum += g;
        for (std::size_t i = 0; i < n.val.size(); ++i)
            xn.grad[i] += n.grad[i] - std::exp(n.val[i]) * gsum;
    });
}

Tape::Id Tape::clamp(Id x, double lo, double hi) {
    Vec out = value(x);
    for (auto& v : out) v = std::min(hi, std::max(lo, v));
    return push(std::move(out), "clamp", [x, lo, hi](Tape& t, const Node& n) {
        Node& xn = t.node(x);
        for (std::size_t i = 0; i < n.val.size(); ++i)
            if (xn.val[i] > lo && xn.val[i] < hi) xn.grad[i] += n.grad[i];
    });
}

Tape::Id Tape::gaussian_kl(Id mu, Id logvar) {
    Id lv = clamp(logvar, kLogvarMin, kLogvarMax);
    const Vec& mv = value(mu);
    const Vec& lvv = value(lv);
    double acc = 0.0;
    for (std::size_t i = 0; i < mv.size(); ++i)
        acc += 1.0 + lvv[i] - mv[i] * mv[i] - std::exp(lvv[i]);
    return push({-0.5 * acc}, "gaussian_kl", [mu, lv](Tape& t, const Node& n) {
        Node& mn = t.node(mu);
        Node& ln = t.node(lv);
        double g = n.grad[0];
        for (std::size_t i = 0; i < mn.val.size(); ++i) {
            mn.grad[i] += g * mn.val[i];
            ln.grad[i] += g * 0.5 * (std::exp(ln.val[i]) - 1.0);
        }
    });
}

Tape::Id Tape::reparameterize(Id mu, Id logvar, const Vec& noise) {
    Id lv = clamp(logvar, kLogvarMin, kLogvarMax);
    const Vec& mv = value(mu);
    const Vec& lvv = value(lv);
    if (noise.size() != mv.size()) throw ConfigError("reparameterize: noise length mismatch");
    Vec out(mv.size());
    for (std::size_t i = 0; i < mv.size(); ++i)
        out[i] = mv[i] + noise[i] * std::exp(0.5 * lvv[i]);
    return push(std::move(out), "reparameterize", [mu, lv, noise](Tape& t, const Node& n) {
        Node& mn = t.node(mu);
        Node& ln = t.node(lv);
        for (std::size_t i = 0; i < n.val.size(); ++i) {
            mn.grad[i] += n.grad[i];
            ln.grad[i] += n.grad[i] * noise[i] * 0.5 * std::exp(0.5 * ln.val[i]);
        }
    });
}

Tape::Id Tape::dot(Id a, Id b) {
    const Vec& av = value(a);
    const Vec& bv = value(b);
    if (av.size() != bv.size()) throw ConfigError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    return push({acc}, "dot", [a, b](Tape& t, const Node& n) {
        Node& an = t.node(a);
        Node& bn = t.node(b);
        double g = n.grad[0];
        for (std::size_t i = 0; i < an.val.size(); ++i) {
            an.grad[i] += g * bn.val[i];
            bn.grad[i] += g * an.val[i];
        }
    });
}

Tape::Id Tape::sq_norm_diff(Id a, const Vec& target) {
    const Vec& av = value(a);
    if (av.size() != target.size()) throw ConfigError("sq_norm_diff: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - target[i];
        acc += d * d;
    }
    return push({acc}, "sq_norm_diff", [a, target](Tape& t, const Node& n) {
        Node& an = t.node(a);
        double g = n.grad[0];
        for (std::size_t i = 0; i < an.val.size(); ++i)
            an.grad[i] += g * 2.0 * (an.val[i] - target[i]);
    });
}

Tape::Id Tape::weighted_nll(Id logp, const Vec& weights) {
    const Vec& lv = value(logp);
    if (lv.size() != weights.size()) throw ConfigError("weighted_nll: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < lv.size(); ++i) acc -= weights[i] * lv[i];
    return push({acc}, "weighted_nll", [logp, weights](Tape& t, const Node& n) {
        Node& xn = t.node(logp);
        double g = n.grad[0];
        for (std::size_t i = 0; i < xn.val.size(); ++i) xn.grad[i] -= g * weights[i];
    });
}

Tape::Id Tape::log_sigmoid(Id scalar) {
    double x = this->scalar(scalar);
    // log sigma(x) = -log(1 + e^-x), computed stably for both signs
    double y = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    return push({y}, "log_sigmoid", [scalar, x](Tape& t, const Node& n) {
        double sig_neg = 1.0 / (1.0 + std::exp(x));  // sigma(-x)
        t.node(scalar).grad[0] += n.grad[0] * sig_neg;
    });
}

Tape::Id Tape::sub(Id a, Id b) {
    const Vec& av = value(a);
    const Vec& bv = value(b);
    if (av.size() != bv.size()) throw ConfigError("sub: length mismatch");
    Vec out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    return push(std::move(out), "sub", [a, b](Tape& t, const Node& n) {
        Node& an = t.node(a);
        Node& bn = t.node(b);
        for (std::size_t i = 0; i < n.val.size(); ++i) {
            an.grad[i] += n.grad[i];
            bn.grad[i] -= n.grad[i];
        }
    });
}

Tape::Id Tape::mean_of(const std::vector<Id>& xs) {
    if (xs.empty()) throw ConfigError("mean_of: empty list");
    std::size_t dim = value(xs[0]).size();
    Vec out(dim, 0.0);
    for (Id id : xs) {
        const Vec& v = value(id);
        if (v.size() != dim) throw ConfigError("mean_of: length mismatch");
        for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
    }
    double inv = 1.0 / static_cast<double>(xs.size());
    for (auto& v : out) v *= inv;
    return push(std::move(out), "mean_of", [xs, inv](Tape& t, const Node& n) {
        for (Id id : xs) {
            Node& xn = t.node(id);
            for (std::size_t i = 0; i < n.val.size(); ++i) xn.grad[i] += n.grad[i] * inv;
        }
    });
}

Tape::Id Tape::concat(Id a, Id b) {
    Vec out = value(a);
    const Vec& bv = value(b);
    std::size_t na = out.size();
    out.insert(out.end(), bv.begin(), bv.end());
    return push(std::move(out), "concat", [a, b, na](Tape& t, const Node& n) {
        Node& an = t.node(a);
        Node& bn = t.node(b);
        for (std::size_t i = 0; i < na; ++i) an.grad[i] += n.grad[i];
        for (std::size_t i = 0; i < bn.val.size(); ++i) bn.grad[i] += n.grad[na + i];
    });
}

Tape::Id Tape::weighted_sum(const std::vector<Id>& scalars, const std::vector<double>& coeffs) {
    if (scalars.size() != coeffs.size()) throw ConfigError("weighted_sum: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < scalars.size(); ++i) acc += coeffs[i] * scalar(scalars[i]);
    return push({acc}, "weighted_sum", [scalars, coeffs](Tape& t, const Node& n) {
        for (std::size_t i = 0; i < scalars.size(); ++i)
            t.node(scalars[i]).grad[0] += n.grad[0] * coeffs[i];
    });
}

double Tape::scalar(Id id) const {
    const Vec& v = value(id);
    if (v.size() != 1) throw ConfigError("scalar: node is not scalar");
    return v[0];
}

void Tape::backward(Id root) {
    double loss = scalar(root);
    if (!std::isfinite(loss)) {
        // report the first op that went non-finite
        for (const auto& n : nodes_)
            for (double v : n.val)
                if (!std::isfinite(v))
                    throw NumericalError(std::string("non-finite value produced by op '") + n.op +
                                         "'");
        throw NumericalError("non-finite loss");
    }
    node(root).grad[0] = 1.0;
    for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = node(id);
        if (n.back) {
            bool any = false;
            for (double g : n.grad)
                if (g != 0.0) {
                    any = true;
                    break;
                }
            if (any) n.back(*this, n);
        } else if (n.store) {
            Vec& dst = n.store->grad(n.slot_name);
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
        }
    }
}

Tape::Id tape_mlp(Tape& t, Tape::Id input, const MLPSpec& spec, ParameterStore& store,
                  const std::string& prefix) {
    spec.validate();
    if (spec.output_heads != OutputHeads::Single)
        throw ConfigError("tape_mlp: use tape_mlp_gaussian for dual heads");
    std::size_t n = spec.layer_widths.size();
    Tape::Id cur = input;
    for (std::size_t l = 1; l < n; ++l) {
        std::string base = prefix + ".L" + std::to_string(l);
        const auto& ws = store.slot(base + ".W");
        Tape::Id w = t.param(store, base + ".W");
        Tape::Id b = t.param(store, base + ".b");
        cur = t.affine(w, b, cur, ws.rows, ws.cols);
        if (l + 1 < n) cur = t.activation(cur, spec.hidden_activation);
    }
    return cur;
}

std::pair<Tape::Id, Tape::Id> tape_mlp_gaussian(Tape& t, Tape::Id input, const MLPSpec& spec,
                                                ParameterStore& store, const std::string& prefix) {
    spec.validate();
    if (spec.output_heads != OutputHeads::MeanAndLogvar)
        throw ConfigError("tape_mlp_gaussian: spec has single head");
    std::size_t n = spec.layer_widths.size();
    Tape::Id cur = input;
    for (std::size_t l = 1; l + 1 < n; ++l) {
        std::string base = prefix + ".L" + std::to_string(l);
        const auto& ws = store.slot(base + ".W");
        Tape::Id w = t.param(store, base + ".W");
        Tape::Id b = t.param(store, base + ".b");
        cur = t.activation(t.affine(w, b, cur, ws.rows, ws.cols), spec.hidden_activation);
    }
    const auto& wm = store.slot(prefix + ".mu.W");
    Tape::Id mu = t.affine(t.param(store, prefix + ".mu.W"), t.param(store, prefix + ".mu.b"), cur,
                           wm.rows, wm.cols);
    const auto& wl = store.slot(prefix + ".lv.W");
    Tape::Id lv = t.affine(t.param(store, prefix + ".lv.W"), t.param(store, prefix + ".lv.b"), cur,
                           wl.rows, wl.cols);
    return {mu, lv};
}

double loss_and_grad(const std::function<Tape::Id(Tape&)>& build, ParameterStore& store) {
    store.zero_grad();
    Tape t;
    Tape::Id root = build(t);
    double loss = t.scalar(root);
    t.backward(root);
    return loss;
}

}  // namespace macvae
