#include "macvae/social_vgae.hpp"

#include <algorithm>
#include <cmath>

#include "macvae/errors.hpp"

namespace macvae {

SocialVGAEModel SocialVGAEModel::create(int feature_dim, int hidden, int latent_dim,
                                        bool concat_self) {
    SocialVGAEModel m;
    m.feature_dim = feature_dim;
    m.hidden_dim = hidden;
    m.latent = latent_dim;
    m.concat_self = concat_self;
    int in1 = concat_self ? 2 * feature_dim : feature_dim;
    int in2 = concat_self ? 2 * hidden : hidden;
    m.params.add("social.agg1.W", hidden, in1);
    m.params.add("social.agg1.b", hidden, 1);
    m.params.add("social.mu.W", latent_dim, in2);
    m.params.add("social.mu.b", latent_dim, 1);
    m.params.add("social.logvar.W", latent_dim, in2);
    m.params.add("social.logvar.b", latent_dim, 1);
    return m;
}

namespace {

// Uniform sample of `fanout` neighbors; without replacement when possible.
// The result is sorted so downstream means are order-independent.
std::vector<int> sample_neighbors(const std::vector<int>& nbrs, int fanout, Rng& rng) {
    std::vector<int> out;
    if (nbrs.empty()) return out;
    if (static_cast<int>(nbrs.size()) >= fanout) {
        std::vector<int> pool = nbrs;
        for (int i = 0; i < fanout; ++i) {
            int j = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        out.assign(pool.begin(), pool.begin() + fanout);
    } else {
        out.reserve(static_cast<std::size_t>(fanout));
        for (int i = 0; i < fanout; ++i)
            out.push_back(nbrs[static_cast<std::size_t>(rng.uniform_int(
                static_cast<int>(nbrs.size())))]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

SubGraph sample_subgraph(const SocialGraph& graph, const std::vector<int>& seeds,
                         const std::vector<int>& fanouts, const ContentFeatures& features,
                         const Rng& rng, bool intrinsic_only) {
    if (fanouts.size() != 2) throw ConfigError("sample_subgraph: expected two fanouts");
    SubGraph sub;
    sub.seed_ids = seeds;
    auto touch = [&](int node) {
        if (!sub.features.count(node))
            sub.features[node] = features.dense_row(node);
    };
    for (int seed : seeds) {
        touch(seed);
        if (sub.hop1.count(seed)) continue;
        auto nbrs = graph.neighbors(seed, intrinsic_only);
        if (nbrs.empty()) sub.isolated.push_back(seed);
        Rng r1 = rng.substream("social.hop1", static_cast<std::uint64_t>(seed));
        auto s1 = sample_neighbors(nbrs, fanouts[0], r1);
        for (int u : s1) touch(u);
        std::vector<int> level1 = s1;
        level1.push_back(seed);
        sub.hop1[seed] = std::move(s1);
        for (int u : level1) {
            if (sub.hop2.count(u)) continue;
            auto unbrs = graph.neighbors(u, intrinsic_only);
            Rng r2 = rng.substream("social.hop2", static_cast<std::uint64_t>(u));
            auto s2 = sample_neighbors(unbrs, fanouts[1], r2);
            for (int w : s2) touch(w);
            sub.hop2[u] = std::move(s2);
        }
    }
    return sub;
}

namespace {

Vec mean_vecs(const std::vector<const Vec*>& vs) {
    Vec out(vs[0]->size(), 0.0);
    for (const Vec* v : vs)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*v)[i];
    double inv = 1.0 / static_cast<double>(vs.size());
    for (auto& x : out) x *= inv;
    return out;
}

Vec affine_vec(const ParameterStore::Slot& w, const Vec& b, const Vec& x) {
    Vec out(static_cast<std::size_t>(w.rows));
    for (int r = 0; r < w.rows; ++r) {
        const double* wr = &w.value[static_cast<std::size_t>(r) * w.cols];
        double acc = b[static_cast<std::size_t>(r)];
        for (int c = 0; c < w.cols; ++c) acc += wr[c] * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    return out;
}

// Level-1 representation of `node` (plain path).
Vec level1_plain(int node, const SubGraph& sub, const SocialVGAEModel& model) {
    const Vec& self = sub.features.at(node);
    const auto& nbrs = sub.hop2.at(node);
    Vec in;
    if (model.concat_self) {
        Vec nbr_mean;
        if (nbrs.empty()) {
            nbr_mean = self;  // self-only neighborhood
        } else {
            std::vector<const Vec*> vs;
            for (int u : nbrs) vs.push_back(&sub.features.at(u));
            nbr_mean = mean_vecs(vs);
        }
        in = self;
        in.insert(in.end(), nbr_mean.begin(), nbr_mean.end());
    } else {
        std::vector<const Vec*> vs{&self};
        for (int u : nbrs) vs.push_back(&sub.features.at(u));
        in = mean_vecs(vs);
    }
    Vec h = affine_vec(model.params.slot("social.agg1.W"), model.params.value("social.agg1.b"), in);
    for (auto& x : h) x = std::tanh(x);
    return h;
}

}  // namespace

std::vector<GaussianParams> encode_social(const SubGraph& sub, const SocialVGAEModel& model) {
    std::unordered_map<int, Vec> h1;
    auto get_h1 = [&](int node) -> const Vec& {
        auto it = h1.find(node);
        if (it == h1.end()) it = h1.emplace(node, level1_plain(node, sub, model)).first;
        return it->second;
    };
    std::vector<GaussianParams> out;
    out.reserve(sub.seed_ids.size());
    for (int seed : sub.seed_ids) {
        const Vec& self = get_h1(seed);
        const auto& nbrs = sub.hop1.at(seed);
        Vec pooled;
        if (model.concat_self) {
            Vec nbr_mean;
            if (nbrs.empty()) {
                nbr_mean = self;
            } else {
                std::vector<const Vec*> vs;
                for (int u : nbrs) vs.push_back(&get_h1(u));
                nbr_mean = mean_vecs(vs);
            }
            pooled = self;
            pooled.insert(pooled.end(), nbr_mean.begin(), nbr_mean.end());
        } else {
            std::vector<const Vec*> vs{&self};
            for (int u : nbrs) vs.push_back(&get_h1(u));
            pooled = mean_vecs(vs);
        }
        Vec mu = affine_vec(model.params.slot("social.mu.W"), model.params.value("social.mu.b"),
                            pooled);
        Vec lv = affine_vec(model.params.slot("social.logvar.W"),
                            model.params.value("social.logvar.b"), pooled);
        out.emplace_back(std::move(mu), std::move(lv));
    }
    return out;
}

std::vector<Triplet> sample_triplets(const SocialGraph& graph, int walk_length, int walks_per_node,
                                     const Rng& rng) {
    if (walk_length < 1) throw ConfigError("sample_triplets: walk_length must be >= 1");
    std::vector<Triplet> out;
    for (int v = 0; v < graph.n_items; ++v) {
        auto nbrs = graph.neighbors(v, false);
        if (nbrs.empty()) continue;
        Rng r = rng.substream("social.walk", static_cast<std::uint64_t>(v));
        for (int w = 0; w < walks_per_node; ++w) {
            int cur = v;
            for (int step = 0; step < walk_length; ++step) {
                auto cn = graph.neighbors(cur, false);
                if (cn.empty()) break;
                cur = cn[static_cast<std::size_t>(r.uniform_int(static_cast<int>(cn.size())))];
                if (cur == v) continue;
                int neg = -1;
                for (int attempt = 0; attempt < 100; ++attempt) {
                    int cand = r.uniform_int(graph.n_items);
                    if (cand != v && !graph.has_edge(v, cand)) {
                        neg = cand;
                        break;
                    }
                }
                if (neg < 0) continue;  // graph too dense around v; drop this draw
                out.push_back({v, cur, neg});
            }
        }
    }
    return out;
}

double graph_bpr_loglik(const Vec& s_v, const Vec& s_pos, const Vec& s_neg) {
    if (s_v.size() != s_pos.size() || s_v.size() != s_neg.size())
        throw ConfigError("graph_bpr_loglik: width mismatch");
    double margin = 0.0;
    for (std::size_t i = 0; i < s_v.size(); ++i) margin += s_v[i] * (s_pos[i] - s_neg[i]);
    return margin >= 0.0 ? -std::log1p(std::exp(-margin)) : margin - std::log1p(std::exp(margin));
}

double social_objective(const std::vector<Triplet>& triplets, const SubGraph& sub,
                        const std::vector<Vec>& v_hat, double lambda_s,
                        const std::vector<Vec>& noise, SocialVGAEModel& model) {
    if (lambda_s < 0.0) throw ConfigError("social_objective: lambda_s must be nonnegative");
    if (noise.size() != sub.seed_ids.size())
        throw ConfigError("social_objective: noise batch mismatch");
    bool coupled = lambda_s > 0.0 && !v_hat.empty();
    if (coupled && v_hat.size() != sub.seed_ids.size())
        throw ConfigError("social_objective: v_hat must cover every sub-graph node");

    return loss_and_grad(
        [&](Tape& t) {
            // level-1 reps, cached per node id
            std::unordered_map<int, Tape::Id> h1;
            auto get_h1 = [&](int node) -> Tape::Id {
                auto it = h1.find(node);
                if (it != h1.end()) return it->second;
                Tape::Id self = t.constant(sub.features.at(node), "feature");
                const auto& nbrs = sub.hop2.at(node);
                Tape::Id in;
                if (model.concat_self) {
                    Tape::Id nbr_mean;
                    if (nbrs.empty()) {
                        nbr_mean = self;
                    } else {
                        std::vector<Tape::Id> vs;
                        for (int u : nbrs) vs.push_back(t.constant(sub.features.at(u), "feature"));
                        nbr_mean = t.mean_of(vs);
                    }
                    in = t.concat(self, nbr_mean);
                } else {
                    std::vector<Tape::Id> vs{self};
                    for (int u : nbrs) vs.push_back(t.constant(sub.features.at(u), "feature"));
                    in = t.mean_of(vs);
                }
                const auto& w = model.params.slot("social.agg1.W");
                Tape::Id h = t.activation(
                    t.affine(t.param(model.params, "social.agg1.W"),
                             t.param(model.params, "social.agg1.b"), in, w.rows, w.cols),
                    Activation::Tanh);
                h1[node] = h;
                return h;
            };

            // seed posteriors and reparameterized samples
            std::unordered_map<int, Tape::Id> latent;
            std::vector<Tape::Id> terms;
            std::vector<double> coeffs;
            for (std::size_t si = 0; si < sub.seed_ids.size(); ++si) {
                int seed = sub.seed_ids[si];
                Tape::Id self = get_h1(seed);
                const auto& nbrs = sub.hop1.at(seed);
                Tape::Id pooled;
                if (model.concat_self) {
                    Tape::Id nbr_mean;
                    if (nbrs.empty()) {
                        nbr_mean = self;
                    } else {
                        std::vector<Tape::Id> vs;
                        for (int u : nbrs) vs.push_back(get_h1(u));
                        nbr_mean = t.mean_of(vs);
                    }
                    pooled = t.concat(self, nbr_mean);
                } else {
                    std::vector<Tape::Id> vs{self};
                    for (int u : nbrs) vs.push_back(get_h1(u));
                    pooled = t.mean_of(vs);
                }
                const auto& wm = model.params.slot("social.mu.W");
                Tape::Id mu = t.affine(t.param(model.params, "social.mu.W"),
                                       t.param(model.params, "social.mu.b"), pooled, wm.rows,
                                       wm.cols);
                Tape::Id lv = t.affine(t.param(model.params, "social.logvar.W"),
                                       t.param(model.params, "social.logvar.b"), pooled, wm.rows,
                                       wm.cols);
                Tape::Id s = t.reparameterize(mu, lv, noise[si]);
                latent[seed] = s;
                terms.push_back(t.gaussian_kl(mu, lv));
                coeffs.push_back(1.0);
                if (coupled) {
                    terms.push_back(t.sq_norm_diff(s, v_hat[si]));
                    coeffs.push_back(0.5 * lambda_s);
                }
            }

            for (const auto& trip : triplets) {
                auto iv = latent.find(trip.v);
                auto ip = latent.find(trip.v_pos);
                auto in_ = latent.find(trip.v_neg);
                if (iv == latent.end() || ip == latent.end() || in_ == latent.end())
                    throw ConfigError("social_objective: triplet member missing from sub-graph");
                Tape::Id margin =
                    t.weighted_sum({t.dot(iv->second, ip->second), t.dot(iv->second, in_->second)},
                                   {1.0, -1.0});
                terms.push_back(t.log_sigmoid(margin));
                coeffs.push_back(-1.0);
            }
            return t.weighted_sum(terms, coeffs);
        },
        model.params);
}

}  // namespace macvae
