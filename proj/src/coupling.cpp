#include "macvae/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "macvae/checkpoint.hpp"
#include "macvae/errors.hpp"
#include "macvae/rank_eval.hpp"

namespace macvae {

CouplingMode parse_mode(const std::string& s) {
    if (s == "collab") return CouplingMode::Collab;
    if (s == "content") return CouplingMode::Content;
    if (s == "social") return CouplingMode::Social;
    if (s == "full") return CouplingMode::Full;
    throw ConfigError("unknown mode '" + s + "' (expected collab|content|social|full)");
}

std::string mode_name(CouplingMode m) {
    switch (m) {
        case CouplingMode::Collab: return "collab";
        case CouplingMode::Content: return "content";
        case CouplingMode::Social: return "social";
        case CouplingMode::Full: return "full";
    }
    return "full";
}

void CouplingConfig::validate() const {
    if (lambda_c <= 0.0 || lambda_s <= 0.0)
        throw ConfigError("config: lambda_c and lambda_s must be positive");
    if (latent_dim <= 0) throw ConfigError("config: latent_dim must be positive");
    if (batch_size <= 0 || epochs < 0 || pretrain_epochs < 0)
        throw ConfigError("config: invalid batch/epoch settings");
    if (fanout1 <= 0 || fanout2 <= 0 || walk_length < 1 || walks_per_node < 0)
        throw ConfigError("config: invalid graph sampling settings");
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw ConfigError("config: expected boolean, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

CouplingConfig CouplingConfig::from_kv(const std::map<std::string, std::string>& kv) {
    CouplingConfig c;
    for (const auto& [k, v] : kv) {
        if (k == "lambda_c") c.lambda_c = std::stod(v);
        else if (k == "lambda_s") c.lambda_s = std::stod(v);
        else if (k == "latent_dim") c.latent_dim = std::stoi(v);
        else if (k == "lr_item") c.lr_item = std::stod(v);
        else if (k == "lr_content") c.lr_content = std::stod(v);
        else if (k == "lr_social") c.lr_social = std::stod(v);
        else if (k == "lr_pretrain") c.lr_pretrain = std::stod(v);
        else if (k == "batch_size") c.batch_size = std::stoi(v);
        else if (k == "epochs") c.epochs = std::stoi(v);
        else if (k == "pretrain_epochs") c.pretrain_epochs = std::stoi(v);
        else if (k == "seed") c.seed = std::stoull(v);
        else if (k == "mode") c.mode = parse_mode(v);
        else if (k == "mse_on_mean") c.mse_on_mean = parse_bool(v);
        else if (k == "couple_via_poe") c.couple_via_poe = parse_bool(v);
        else if (k == "concat_self") c.concat_self = parse_bool(v);
        else if (k == "aux_recon") c.aux_recon = parse_bool(v);
        else if (k == "input_l2norm") c.input_l2norm = parse_bool(v);
        else if (k == "dropout") c.dropout = std::stod(v);
        else if (k == "ndcg_standard") c.ndcg_standard = parse_bool(v);
        else if (k == "collab_hidden") c.collab_hidden = std::stoi(v);
        else if (k == "content_hidden") c.content_hidden = std::stoi(v);
        else if (k == "social_hidden") c.social_hidden = std::stoi(v);
        else if (k == "fanout1") c.fanout1 = std::stoi(v);
        else if (k == "fanout2") c.fanout2 = std::stoi(v);
        else if (k == "walk_length") c.walk_length = std::stoi(v);
        else if (k == "walks_per_node") c.walks_per_node = std::stoi(v);
        else if (k == "triplet_batch") c.triplet_batch = std::stoi(v);
        else if (k == "eval_n") c.eval_n = std::stoi(v);
        else if (k == "patience") c.patience = std::stoi(v);
        else throw ConfigError("config: unknown key '" + k + "'");
    }
    c.validate();
    return c;
}

std::map<std::string, std::string> CouplingConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["lambda_c"] = fmt(lambda_c);
    kv["lambda_s"] = fmt(lambda_s);
    kv["latent_dim"] = std::to_string(latent_dim);
    kv["lr_item"] = fmt(lr_item);
    kv["lr_content"] = fmt(lr_content);
    kv["lr_social"] = fmt(lr_social);
    kv["lr_pretrain"] = fmt(lr_pretrain);
    kv["batch_size"] = std::to_string(batch_size);
    kv["epochs"] = std::to_string(epochs);
    kv["pretrain_epochs"] = std::to_string(pretrain_epochs);
    kv["seed"] = std::to_string(seed);
    kv["mode"] = mode_name(mode);
    kv["mse_on_mean"] = mse_on_mean ? "1" : "0";
    kv["couple_via_poe"] = couple_via_poe ? "1" : "0";
    kv["concat_self"] = concat_self ? "1" : "0";
    kv["aux_recon"] = aux_recon ? "1" : "0";
    kv["input_l2norm"] = input_l2norm ? "1" : "0";
    kv["dropout"] = fmt(dropout);
    kv["ndcg_standard"] = ndcg_standard ? "1" : "0";
    kv["collab_hidden"] = std::to_string(collab_hidden);
    kv["content_hidden"] = std::to_string(content_hidden);
    kv["social_hidden"] = std::to_string(social_hidden);
    kv["fanout1"] = std::to_string(fanout1);
    kv["fanout2"] = std::to_string(fanout2);
    kv["walk_length"] = std::to_string(walk_length);
    kv["walks_per_node"] = std::to_string(walks_per_node);
    kv["triplet_batch"] = std::to_string(triplet_batch);
    kv["eval_n"] = std::to_string(eval_n);
    kv["patience"] = std::to_string(patience);
    return kv;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: malformed line " + std::to_string(lineno) + " in " + path);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void write_config_file(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config file " + path);
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

ModelBundle ModelBundle::create(const CouplingConfig& cfg, int n_tags, int vocab_size) {
    cfg.validate();
    ModelBundle b;
    b.config = cfg;
    b.collab = MultVAEModel::create(n_tags, cfg.collab_hidden, cfg.latent_dim);
    b.content = ContentVAEModel::create(vocab_size, cfg.content_hidden, cfg.latent_dim);
    b.social = SocialVGAEModel::create(vocab_size, cfg.social_hidden, cfg.latent_dim,
                                       cfg.concat_self);
    return b;
}

void ModelBundle::init(Rng& rng) {
    Rng rc = rng.substream("init.collab");
    collab.init(rc);
    Rng rx = rng.substream("init.content");
    content.init(rx);
    Rng rs = rng.substream("init.social");
    social.init(rs);
}

void ModelBundle::save(const std::string& path) const {
    ParameterStore combined;
    for (const ParameterStore* store : {&collab.params, &content.params, &social.params})
        for (const auto& [name, slot] : store->slots()) {
            combined.add(name, slot.rows, slot.cols);
            combined.value(name) = slot.value;
        }
    std::ostringstream header;
    header << "macvae-bundle v1\n";
    header << "n_tags=" << collab.n_tags() << '\n';
    header << "vocab=" << content.vocab_size() << '\n';
    for (const auto& [k, v] : config.to_kv()) header << k << '=' << v << '\n';
    checkpoint::save(path, header.str(), combined);
}

ModelBundle ModelBundle::load(const std::string& path) {
    ParameterStore combined;
    std::string header = checkpoint::load(path, combined);
    std::istringstream in(header);
    std::string line;
    std::getline(in, line);
    if (line != "macvae-bundle v1") throw DataError("bundle: bad header in " + path);
    int n_tags = -1, vocab = -1;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("bundle: malformed header line");
        std::string k = line.substr(0, eq), v = line.substr(eq + 1);
        if (k == "n_tags") n_tags = std::stoi(v);
        else if (k == "vocab") vocab = std::stoi(v);
        else kv[k] = v;
    }
    if (n_tags <= 0 || vocab <= 0) throw DataError("bundle: missing dimensions in header");
    ModelBundle b = create(CouplingConfig::from_kv(kv), n_tags, vocab);
    for (ParameterStore* store : {&b.collab.params, &b.content.params, &b.social.params})
        for (auto& [name, slot] : store->slots_mut()) {
            const auto& src = combined.slot(name);
            if (src.rows != slot.rows || src.cols != slot.cols)
                throw DataError("bundle: shape mismatch for " + name);
            slot.value = src.value;
        }
    return b;
}

GaussianParams poe_fuse(const GaussianParams& q_c, const GaussianParams& q_s, double lambda_c,
                        double lambda_s) {
    if (q_c.dim() != q_s.dim()) throw ConfigError("poe_fuse: dimension mismatch");
    double total = lambda_c + lambda_s;
    if (total <= 0.0) throw ConfigError("poe_fuse: lambda_c + lambda_s must be positive");
    Vec mean(q_c.dim());
    for (std::size_t i = 0; i < mean.size(); ++i)
        mean[i] = (q_c.mean[i] * lambda_c + q_s.mean[i] * lambda_s) / total;
    Vec logvar(q_c.dim(), -std::log(total));
    return GaussianParams(std::move(mean), std::move(logvar));
}

// ---- training -------------------------------------------------------------

namespace {

std::vector<std::vector<int>> make_batches(std::vector<int> order, int batch_size) {
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
        auto end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

std::vector<Vec> batch_noise(Rng& rng, std::size_t n, int dim) {
    std::vector<Vec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(rng.normal_vec(static_cast<std::size_t>(dim)));
    return out;
}

struct TrainContext {
    const Dataset& data;
    InteractionMatrix train_rows;
    std::vector<int> existing;

    explicit TrainContext(const Dataset& d)
        : data(d), train_rows(d.train_interactions()), existing(d.split.existing_items()) {}

    Vec rating_row(int item) const { return train_rows.dense_row(item); }
    Vec content_row(int item) const { return data.content.dense_row(item); }
};

std::vector<Vec> collab_means(const TrainContext& ctx, const ModelBundle& m,
                              const std::vector<int>& items) {
    std::vector<Vec> rows;
    rows.reserve(items.size());
    for (int i : items) rows.push_back(ctx.rating_row(i));
    auto qs = encode_ratings(rows, m.collab, m.config.input_l2norm);
    std::vector<Vec> out;
    out.reserve(qs.size());
    for (auto& q : qs) out.push_back(std::move(q.mean));
    return out;
}

std::vector<Vec> content_means(const TrainContext& ctx, const ModelBundle& m,
                               const std::vector<int>& items) {
    std::vector<Vec> rows;
    rows.reserve(items.size());
    for (int i : items) rows.push_back(ctx.content_row(i));
    auto qs = encode_content(rows, m.content);
    std::vector<Vec> out;
    out.reserve(qs.size());
    for (auto& q : qs) out.push_back(std::move(q.mean));
    return out;
}

std::vector<Vec> social_means(const TrainContext& ctx, const ModelBundle& m,
                              const std::vector<int>& items, const Rng& base) {
    SubGraph sub = sample_subgraph(ctx.data.graph, items, {m.config.fanout1, m.config.fanout2},
                                   ctx.data.content, base, /*intrinsic_only=*/false);
    auto qs = encode_social(sub, m.social);
    std::vector<Vec> out;
    out.reserve(qs.size());
    for (auto& q : qs) out.push_back(std::move(q.mean));
    return out;
}

double run_item_block(TrainContext& ctx, ModelBundle& m, const Rng& root, int epoch, double lc,
                      double ls, bool aux, double lr) {
    const auto& cfg = m.config;
    std::vector<int> order = ctx.existing;
    Rng shuffle_rng = root.substream("item.shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    Rng noise_rng = root.substream("item.noise", static_cast<std::uint64_t>(epoch));
    Rng sample_rng = root.substream("social.meaninfer");
    CollabOptions opts{cfg.input_l2norm, cfg.mse_on_mean, cfg.couple_via_poe, aux, cfg.dropout};

    double total = 0.0;
    int n_batches = 0;
    for (const auto& batch : make_batches(order, cfg.batch_size)) {
        std::vector<Vec> rows;
        rows.reserve(batch.size());
        for (int i : batch) rows.push_back(ctx.rating_row(i));
        std::vector<Vec> cmu, smu;
        if (lc > 0.0) cmu = content_means(ctx, m, batch);
        if (ls > 0.0) smu = social_means(ctx, m, batch, sample_rng);
        auto noise = batch_noise(noise_rng, batch.size(), cfg.latent_dim);
        try {
            total += item_objective(rows, cmu, smu, lc, ls, noise, m.collab, opts);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("item block, batch ") + std::to_string(n_batches) +
                                 ": " + e.what());
        }
        m.collab.params.adam_step(lr);
        ++n_batches;
    }
    return n_batches ? total / n_batches : 0.0;
}

double run_content_block(TrainContext& ctx, ModelBundle& m, const Rng& root, int epoch, double lc,
                         double lr) {
    const auto& cfg = m.config;
    std::vector<int> order = ctx.existing;
    Rng shuffle_rng = root.substream("content.shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    Rng noise_rng = root.substream("content.noise", static_cast<std::uint64_t>(epoch));

    double total = 0.0;
    int n_batches = 0;
    for (const auto& batch : make_batches(order, cfg.batch_size)) {
        std::vector<Vec> rows;
        rows.reserve(batch.size());
        for (int i : batch) rows.push_back(ctx.content_row(i));
        std::vector<Vec> vhat;
        if (lc > 0.0) vhat = collab_means(ctx, m, batch);
        auto noise = batch_noise(noise_rng, batch.size(), cfg.latent_dim);
        try {
            total += content_objective(rows, vhat, lc, noise, m.content);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("content block, batch ") + std::to_string(n_batches) +
                                 ": " + e.what());
        }
        m.content.params.adam_step(lr);
        ++n_batches;
    }
    return n_batches ? total / n_batches : 0.0;
}

double run_social_block(TrainContext& ctx, ModelBundle& m, const Rng& root, int epoch, double ls,
                        double lr) {
    const auto& cfg = m.config;
    auto trips = sample_triplets(ctx.data.graph, cfg.walk_length, cfg.walks_per_node,
                                 root.substream("social.trip", static_cast<std::uint64_t>(epoch)));
    Rng shuffle_rng = root.substream("social.tripshuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(trips);
    Rng noise_rng = root.substream("social.noise", static_cast<std::uint64_t>(epoch));
    Rng sample_rng = root.substream("social.sample", static_cast<std::uint64_t>(epoch));

    double total = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < trips.size();
         start += static_cast<std::size_t>(cfg.triplet_batch)) {
        auto end = std::min(trips.size(), start + static_cast<std::size_t>(cfg.triplet_batch));
        std::vector<Triplet> chunk(trips.begin() + static_cast<std::ptrdiff_t>(start),
                                   trips.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<int> seeds;
        for (const auto& tr : chunk) {
            seeds.push_back(tr.v);
            seeds.push_back(tr.v_pos);
            seeds.push_back(tr.v_neg);
        }
        std::sort(seeds.begin(), seeds.end());
        seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
        SubGraph sub = sample_subgraph(ctx.data.graph, seeds, {cfg.fanout1, cfg.fanout2},
                                       ctx.data.content, sample_rng, false);
        std::vector<Vec> vhat;
        if (ls > 0.0) vhat = collab_means(ctx, m, seeds);
        auto noise = batch_noise(noise_rng, seeds.size(), cfg.latent_dim);
        try {
            total += social_objective(chunk, sub, vhat, ls, noise, m.social);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("social block, batch ") + std::to_string(n_batches) +
                                 ": " + e.what());
        }
        m.social.params.adam_step(lr);
        ++n_batches;
    }
    // reported per triplet: the objective itself is a sum, but the count is
    // resampled every epoch, so the raw sum is not comparable across epochs
    return trips.empty() ? 0.0 : total / static_cast<double>(trips.size());
}

}  // namespace

std::vector<EpochRecord> pretrain(ModelBundle& models, const Dataset& data) {
    const auto& cfg = models.config;
    cfg.validate();
    TrainContext ctx(data);
    Rng root(cfg.seed);
    Rng pre = root.substream("pretrain");
    std::vector<EpochRecord> history;
    for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.item_loss = run_item_block(ctx, models, pre, epoch, 0.0, 0.0, false, cfg.lr_pretrain);
        if (cfg.use_content())
            rec.content_loss = run_content_block(ctx, models, pre, epoch, 0.0, cfg.lr_pretrain);
        if (cfg.use_social())
            rec.social_loss = run_social_block(ctx, models, pre, epoch, 0.0, cfg.lr_pretrain);
        history.push_back(rec);
    }
    return history;
}

TrainState train(ModelBundle& models, const Dataset& data, const std::string& out_dir) {
    const auto& cfg = models.config;
    cfg.validate();
    TrainContext ctx(data);
    Rng root(cfg.seed);
    Rng tr = root.substream("train");

    TrainState state;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        double lc = cfg.effective_lambda_c();
        double ls = cfg.effective_lambda_s();
        rec.item_loss = run_item_block(ctx, models, tr, epoch, lc, ls,
                                       cfg.aux_recon && (lc > 0.0 || ls > 0.0), cfg.lr_item);
        if (cfg.use_content())
            rec.content_loss = run_content_block(ctx, models, tr, epoch, lc, cfg.lr_content);
        if (cfg.use_social())
            rec.social_loss = run_social_block(ctx, models, tr, epoch, ls, cfg.lr_social);

        EvalReport rep = evaluate(data, models, cfg.eval_n, Segment::Existing, TruthPart::Valid);
        rec.val_recall = rep.recall;
        rec.val_ndcg = rep.ndcg;
        rec.val_mrr = rep.mrr;
        state.history.push_back(rec);

        if (rec.val_recall > state.best_recall) {
            state.best_recall = rec.val_recall;
            state.best_epoch = epoch;
            state.best = models;
        }
        if (cfg.patience > 0 && epoch - state.best_epoch >= cfg.patience) break;
    }

    if (!out_dir.empty()) {
        std::ofstream csv(out_dir + "/losses.csv");
        if (!csv) throw DataError("train: cannot write " + out_dir + "/losses.csv");
        csv << format_csv(state.history);
        models.save(out_dir + "/final.ckpt");
        if (state.best) state.best->save(out_dir + "/best.ckpt");
    }
    return state;
}

std::string format_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out << "epoch,item_loss,content_loss,social_loss,val_recall,val_ndcg,val_mrr\n";
    for (const auto& r : history)
        out << r.epoch << ',' << fmt(r.item_loss) << ',' << fmt(r.content_loss) << ','
            << fmt(r.social_loss) << ',' << fmt(r.val_recall) << ',' << fmt(r.val_ndcg) << ','
            << fmt(r.val_mrr) << '\n';
    return out.str();
}

}  // namespace macvae
