#pragma once

#include <unordered_map>
#include <vector>

#include "macvae/corpus.hpp"
#include "macvae/numerics.hpp"
#include "macvae/tape.hpp"

namespace macvae {

// Fanout-bounded two-layer neighborhood sample. Neighbor draws are keyed per
// node (not per batch position), so an identical node always receives the
// identical sample under the same base rng; samples are sorted, making the
// aggregation invariant to neighbor order.
struct SubGraph {
    std::vector<int> seed_ids;
    std::unordered_map<int, std::vector<int>> hop1;  // per seed
    std::unordered_map<int, std::vector<int>> hop2;  // per level-1 node (seeds included)
    std::unordered_map<int, Vec> features;           // every touched node
    std::vector<int> isolated;                       // self-only neighborhoods
};

struct Triplet {
    int v;
    int v_pos;
    int v_neg;
};

// Inductive encoder: shared mean-aggregation layer 1, dual linear heads on
// layer 2, parameter-free inner-product decoder. Slots: social.agg1.*,
// social.mu.*, social.logvar.*.
struct SocialVGAEModel {
    int feature_dim = 0;
    int hidden_dim = 0;
    int latent = 0;
    bool concat_self = false;  // concatenation variant of the skip connection
    ParameterStore params;

    int latent_dim() const { return latent; }

    static SocialVGAEModel create(int feature_dim, int hidden, int latent_dim,
                                  bool concat_self = false);
    void init(Rng& rng) { params.init_uniform(rng); }
};

// fanouts = {layer-1 fanout, layer-2 fanout}. Sampling is uniform without
// replacement when the degree covers the fanout, with replacement otherwise.
SubGraph sample_subgraph(const SocialGraph& graph, const std::vector<int>& seeds,
                         const std::vector<int>& fanouts, const ContentFeatures& features,
                         const Rng& rng, bool intrinsic_only = false);

// Posterior per seed, in seed order.
std::vector<GaussianParams> encode_social(const SubGraph& sub, const SocialVGAEModel& model);

// Random-walk positives (co-visited within a walk), uniformly resampled
// negatives that are not adjacent to the anchor (up to 100 attempts each;
// exhausted draws are dropped).
std::vector<Triplet> sample_triplets(const SocialGraph& graph, int walk_length, int walks_per_node,
                                     const Rng& rng);

// log sigma(s_v . s_pos - s_v . s_neg)
double graph_bpr_loglik(const Vec& s_v, const Vec& s_pos, const Vec& s_neg);

// Coupled social-block loss: -sum BPR log-likelihood over triplets
// + sum KL over seed nodes + (lambda_s/2) sum ||v_hat - s||^2 over seed
// nodes. v_hat and noise are aligned with sub.seed_ids; v_hat may be empty
// when lambda_s == 0. Gradients land in model.params only.
double social_objective(const std::vector<Triplet>& triplets, const SubGraph& sub,
                        const std::vector<Vec>& v_hat, double lambda_s,
                        const std::vector<Vec>& noise, SocialVGAEModel& model);

}  // namespace macvae
