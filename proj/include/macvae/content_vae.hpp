#pragma once

#include <vector>

#include "macvae/numerics.hpp"
#include "macvae/tape.hpp"

namespace macvae {

// Gaussian VAE over TF-IDF rows. Slots live under "content.enc.*" /
// "content.dec.*". Decoder output is linear; reconstruction is unit-variance
// Gaussian, i.e. a plain squared-error loss.
struct ContentVAEModel {
    MLPSpec encoder;  // [vocab -> h -> h -> (K, K)]
    MLPSpec decoder;  // [K -> h -> h -> vocab]
    ParameterStore params;

    int vocab_size() const { return encoder.input_width(); }
    int latent_dim() const { return encoder.output_width(); }

    static ContentVAEModel create(int vocab, int hidden, int latent_dim);
    void init(Rng& rng) { params.init_uniform(rng); }
};

std::vector<GaussianParams> encode_content(const std::vector<Vec>& rows,
                                           const ContentVAEModel& model);

// Coupled content-block loss (batch mean). v_hat are detached item means;
// pass empty to train uncoupled (lambda_c must then be 0).
double content_objective(const std::vector<Vec>& rows, const std::vector<Vec>& v_hat,
                         double lambda_c, const std::vector<Vec>& noise, ContentVAEModel& model);

}  // namespace macvae
