#pragma once

#include <string>
#include <vector>

#include "macvae/numerics.hpp"
#include "macvae/tape.hpp"

namespace macvae {

// Multinomial VAE over item-tag rows. Encoder and decoder parameters live in
// one store under "collab.enc.*" / "collab.dec.*".
struct MultVAEModel {
    MLPSpec encoder;  // [J -> hidden -> (K, K)]
    MLPSpec decoder;  // [K -> hidden -> J]
    ParameterStore params;

    int n_tags() const { return encoder.input_width(); }
    int latent_dim() const { return encoder.output_width(); }

    static MultVAEModel create(int n_tags, int hidden, int latent_dim);
    void init(Rng& rng) { params.init_uniform(rng); }
};

struct CollabOptions {
    bool input_l2norm = true;
    bool mse_on_mean = false;     // couple on mu_v instead of the sampled v
    bool couple_via_poe = false;  // couple against the fused auxiliary mean
    bool aux_recon = true;        // decode the auxiliary means through the item decoder
    double dropout = 0.0;         // encoder-input dropout rate (0 disables)
};

// Per-item posterior; rows are L2-normalized before the first layer when
// configured. All-zero rows are fine (cold stand-ins).
std::vector<GaussianParams> encode_ratings(const std::vector<Vec>& rows, const MultVAEModel& model,
                                           bool input_l2norm = true);

// Log tag probabilities for a batch of latents.
std::vector<Vec> decode_to_tag_logprobs(const std::vector<Vec>& latents, const MultVAEModel& model);

// -sum_j r_j log pi_j (multinomial coefficient dropped).
double multinomial_nll(const Vec& log_probs, const Vec& row);

// One coupled item-block loss over a batch. content_mu/social_mu are detached
// constants; pass empty vectors to disable a coupling side (its lambda must
// then be 0). noise: one K-vector per batch row. Gradients land in
// model.params only.
double item_objective(const std::vector<Vec>& rows, const std::vector<Vec>& content_mu,
                      const std::vector<Vec>& social_mu, double lambda_c, double lambda_s,
                      const std::vector<Vec>& noise, MultVAEModel& model,
                      const CollabOptions& opts);

}  // namespace macvae
