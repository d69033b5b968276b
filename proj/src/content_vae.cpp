#include "macvae/content_vae.hpp"

#include "macvae/errors.hpp"

namespace macvae {

ContentVAEModel ContentVAEModel::create(int vocab, int hidden, int latent_dim) {
    ContentVAEModel m;
    m.encoder = MLPSpec{{vocab, hidden, hidden, latent_dim}, Activation::Tanh,
                        OutputHeads::MeanAndLogvar};
    m.decoder = MLPSpec{{latent_dim, hidden, hidden, vocab}, Activation::Tanh, OutputHeads::Single};
    register_mlp(m.params, "content.enc", m.encoder);
    register_mlp(m.params, "content.dec", m.decoder);
    return m;
}

std::vector<GaussianParams> encode_content(const std::vector<Vec>& rows,
                                           const ContentVAEModel& model) {
    std::vector<GaussianParams> out;
    out.reserve(rows.size());
    for (const auto& x : rows)
        out.push_back(mlp_gaussian(x, model.encoder, model.params, "content.enc"));
    return out;
}

double content_objective(const std::vector<Vec>& rows, const std::vector<Vec>& v_hat,
                         double lambda_c, const std::vector<Vec>& noise, ContentVAEModel& model) {
    if (lambda_c < 0.0) throw ConfigError("content_objective: lambda_c must be nonnegative");
    if (noise.size() != rows.size()) throw ConfigError("content_objective: noise batch mismatch");
    bool coupled = lambda_c > 0.0 && !v_hat.empty();

    return loss_and_grad(
        [&](Tape& t) {
            std::vector<Tape::Id> terms;
            std::vector<double> coeffs;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Tape::Id input = t.constant(rows[i], "content_row");
                auto [mu, lv] = tape_mlp_gaussian(t, input, model.encoder, model.params,
                                                  "content.enc");
                Tape::Id c = t.reparameterize(mu, lv, noise[i]);
                Tape::Id xhat = tape_mlp(t, c, model.decoder, model.params, "content.dec");
                terms.push_back(t.sq_norm_diff(xhat, rows[i]));
                coeffs.push_back(0.5);
                terms.push_back(t.gaussian_kl(mu, lv));
                coeffs.push_back(1.0);
                if (coupled) {
                    terms.push_back(t.sq_norm_diff(c, v_hat[i]));
                    coeffs.push_back(0.5 * lambda_c);
                }
            }
            double inv = 1.0 / static_cast<double>(rows.size());
            for (auto& cf : coeffs) cf *= inv;
            return t.weighted_sum(terms, coeffs);
        },
        model.params);
}

}  // namespace macvae
