#include "macvae/collab_vae.hpp"

#include <cmath>

#include "macvae/errors.hpp"

namespace macvae {

MultVAEModel MultVAEModel::create(int n_tags, int hidden, int latent_dim) {
    MultVAEModel m;
    m.encoder = MLPSpec{{n_tags, hidden, latent_dim}, Activation::Tanh, OutputHeads::MeanAndLogvar};
    m.decoder = MLPSpec{{latent_dim, hidden, n_tags}, Activation::Tanh, OutputHeads::Single};
    register_mlp(m.params, "collab.enc", m.encoder);
    register_mlp(m.params, "collab.dec", m.decoder);
    return m;
}

std::vector<GaussianParams> encode_ratings(const std::vector<Vec>& rows, const MultVAEModel& model,
                                           bool input_l2norm) {
    std::vector<GaussianParams> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        Vec x = r;
        if (input_l2norm) l2_normalize(x);
        out.push_back(mlp_gaussian(x, model.encoder, model.params, "collab.enc"));
    }
    return out;
}

std::vector<Vec> decode_to_tag_logprobs(const std::vector<Vec>& latents,
                                        const MultVAEModel& model) {
    std::vector<Vec> out;
    out.reserve(latents.size());
    for (const auto& z : latents) {
        auto acts = mlp_forward(z, model.decoder, model.params, "collab.dec");
        out.push_back(softmax_log(acts.back()));
    }
    return out;
}

double multinomial_nll(const Vec& log_probs, const Vec& row) {
    if (log_probs.size() != row.size()) throw ConfigError("multinomial_nll: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) acc -= row[i] * log_probs[i];
    return acc;
}

double item_objective(const std::vector<Vec>& rows, const std::vector<Vec>& content_mu,
                      const std::vector<Vec>& social_mu, double lambda_c, double lambda_s,
                      const std::vector<Vec>& noise, MultVAEModel& model,
                      const CollabOptions& opts) {
    if (lambda_c < 0.0 || lambda_s < 0.0)
        throw ConfigError("item_objective: lambda must be nonnegative");
    if (noise.size() != rows.size()) throw ConfigError("item_objective: noise batch mismatch");
    bool use_content = lambda_c > 0.0 && !content_mu.empty();
    bool use_social = lambda_s > 0.0 && !social_mu.empty();

    return loss_and_grad(
        [&](Tape& t) {
            std::vector<Tape::Id> terms;
            std::vector<double> coeffs;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Vec x = rows[i];
                if (opts.input_l2norm) l2_normalize(x);
                Tape::Id input = t.constant(std::move(x), "row");
                auto [mu, lv] = tape_mlp_gaussian(t, input, model.encoder, model.params,
                                                  "collab.enc");
                Tape::Id v = t.reparameterize(mu, lv, noise[i]);
                Tape::Id logp =
                    t.softmax_log(tape_mlp(t, v, model.decoder, model.params, "collab.dec"));
                terms.push_back(t.weighted_nll(logp, rows[i]));
                coeffs.push_back(1.0);

                Tape::Id coupled = opts.mse_on_mean ? mu : v;
                if (opts.couple_via_poe && use_content && use_social) {
                    Vec fused(content_mu[i].size());
                    for (std::size_t k = 0; k < fused.size(); ++k)
                        fused[k] = (content_mu[i][k] * lambda_c + social_mu[i][k] * lambda_s) /
                                   (lambda_c + lambda_s);
                    terms.push_back(t.sq_norm_diff(coupled, fused));
                    coeffs.push_back(0.5 * (lambda_c + lambda_s));
                    if (opts.aux_recon) {
                        Tape::Id z = t.constant(fused, "aux_mean");
                        Tape::Id lp = t.softmax_log(
                            tape_mlp(t, z, model.decoder, model.params, "collab.dec"));
                        terms.push_back(t.weighted_nll(lp, rows[i]));
                        coeffs.push_back(1.0);
                    }
                } else {
                    if (use_content) {
                        terms.push_back(t.sq_norm_diff(coupled, content_mu[i]));
                        coeffs.push_back(0.5 * lambda_c);
                    }
                    if (use_social) {
                        terms.push_back(t.sq_norm_diff(coupled, social_mu[i]));
                        coeffs.push_back(0.5 * lambda_s);
                    }
                    if (opts.aux_recon) {
                        for (const std::vector<Vec>* aux :
                             {use_content ? &content_mu : nullptr,
                              use_social ? &social_mu : nullptr}) {
                            if (!aux) continue;
                            Tape::Id z = t.constant((*aux)[i], "aux_mean");
                            Tape::Id lp = t.softmax_log(
                                tape_mlp(t, z, model.decoder, model.params, "collab.dec"));
                            terms.push_back(t.weighted_nll(lp, rows[i]));
                            coeffs.push_back(1.0);
                        }
                    }
                }
            }
            double inv = 1.0 / static_cast<double>(rows.size());
            for (auto& c : coeffs) c *= inv;  // batch mean
            return t.weighted_sum(terms, coeffs);
        },
        model.params);
}

}  // namespace macvae
