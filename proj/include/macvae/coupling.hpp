#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "macvae/collab_vae.hpp"
#include "macvae/content_vae.hpp"
#include "macvae/corpus.hpp"
#include "macvae/social_vgae.hpp"

namespace macvae {

// Which information sources participate (mirrors the ablation rows: plain
// Mult-VAE, +content, +social, full).
enum class CouplingMode { Collab, Content, Social, Full };

CouplingMode parse_mode(const std::string& s);
std::string mode_name(CouplingMode m);

struct CouplingConfig {
    double lambda_c = 10.0;
    double lambda_s = 10.0;
    int latent_dim = 64;
    double lr_item = 1e-5;
    double lr_content = 1e-4;
    double lr_social = 5e-4;
    double lr_pretrain = 1e-3;
    int batch_size = 64;
    int epochs = 100;
    int pretrain_epochs = 20;
    std::uint64_t seed = 1;
    CouplingMode mode = CouplingMode::Full;
    // flags
    bool mse_on_mean = false;
    bool couple_via_poe = false;
    bool concat_self = false;
    bool aux_recon = true;
    bool input_l2norm = true;
    double dropout = 0.0;
    bool ndcg_standard = false;
    // architectures
    int collab_hidden = 600;
    int content_hidden = 64;
    int social_hidden = 64;
    // graph sampling
    int fanout1 = 20;
    int fanout2 = 20;
    int walk_length = 3;
    int walks_per_node = 5;
    int triplet_batch = 256;
    // evaluation / stopping
    int eval_n = 20;
    int patience = 10;

    void validate() const;
    bool use_content() const {
        return mode == CouplingMode::Content || mode == CouplingMode::Full;
    }
    bool use_social() const { return mode == CouplingMode::Social || mode == CouplingMode::Full; }
    double effective_lambda_c() const { return use_content() ? lambda_c : 0.0; }
    double effective_lambda_s() const { return use_social() ? lambda_s : 0.0; }

    static CouplingConfig from_kv(const std::map<std::string, std::string>& kv);
    std::map<std::string, std::string> to_kv() const;
};

// Flat key=value config file.
std::map<std::string, std::string> read_config_file(const std::string& path);
void write_config_file(const std::string& path, const std::map<std::string, std::string>& kv);

struct ModelBundle {
    MultVAEModel collab;
    ContentVAEModel content;
    SocialVGAEModel social;
    CouplingConfig config;

    static ModelBundle create(const CouplingConfig& cfg, int n_tags, int vocab_size);
    void init(Rng& rng);
    void save(const std::string& path) const;
    static ModelBundle load(const std::string& path);
};

struct EpochRecord {
    int epoch = 0;
    double item_loss = 0.0;
    double content_loss = 0.0;
    double social_loss = 0.0;
    double val_recall = 0.0;
    double val_ndcg = 0.0;
    double val_mrr = 0.0;
};

struct TrainState {
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_recall = -1.0;
    std::optional<ModelBundle> best;  // snapshot at the best validation recall
};

// Precision-weighted product of two Gaussian experts with configured scalar
// precisions; fused variance is 1 / (lambda_c + lambda_s).
GaussianParams poe_fuse(const GaussianParams& q_c, const GaussianParams& q_s, double lambda_c,
                        double lambda_s);

// Independent warmup of each enabled model with the coupling terms off.
// Returns per-epoch losses per block (item, content, social).
std::vector<EpochRecord> pretrain(ModelBundle& models, const Dataset& data);

// Three-block coordinate ascent with per-epoch validation; writes
// losses.csv and checkpoints when out_dir is nonempty.
TrainState train(ModelBundle& models, const Dataset& data, const std::string& out_dir = "");

std::string format_csv(const std::vector<EpochRecord>& history);

}  // namespace macvae
