#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "macvae/coupling.hpp"
#include "macvae/errors.hpp"
#include "macvae/rank_eval.hpp"
#include "macvae/synth.hpp"

namespace fs = std::filesystem;
using namespace macvae;

namespace {

int env_threads() {
    const char* v = std::getenv("MAVAE_THREADS");
    if (!v) return 1;
    int n = std::atoi(v);
    return n > 0 ? n : 1;
}

CouplingConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = read_config_file(config_path);
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + ov + "'");
        kv[ov.substr(0, eq)] = ov.substr(eq + 1);
    }
    return CouplingConfig::from_kv(kv);
}

void make_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir);
    fs::path lock = fs::path(dir) / ".macvae-lock";
    if (fs::exists(lock))
        throw ConfigError("output directory " + dir + " is locked by another run (remove " +
                          lock.string() + " if stale)");
    std::ofstream(lock.string()) << "pid " << ::getpid() << '\n';
}

void release_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::remove(fs::path(dir) / ".macvae-lock", ec);
}

struct LockGuard {
    std::string dir;
    explicit LockGuard(std::string d) : dir(std::move(d)) { make_out_dir(dir); }
    ~LockGuard() { release_out_dir(dir); }
};

IdMap load_id_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open id map " + path);
    IdMap m;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        m.intern(tab == std::string::npos ? line : line.substr(0, tab));
    }
    return m;
}

int run_synth(const SynthOptions& opts, const std::string& out) {
    RawDataset raw = generate_synthetic(opts);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out);
    save_raw_dataset(out, raw);
    std::cout << "synth: " << opts.n_items << " items, " << opts.n_tags << " tags, "
              << raw.interactions.size() << " interactions -> " << out << '\n';
    return 0;
}

int run_prepare(const std::string& raw_dir, const PrepareOptions& opts, const std::string& out) {
    RawDataset raw = load_raw_dataset(raw_dir);
    PreparedData prep = prepare_dataset(raw, opts);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out);
    save_dataset(out, prep.dataset);
    save_id_map(out + "/items.map", prep.items);
    save_id_map(out + "/tags.map", prep.tags);
    std::cout << "prepare: " << prep.dataset.interactions.n_items << " items, "
              << prep.dataset.interactions.n_tags << " tags, " << prep.dataset.graph.edge_count()
              << " edges, " << prep.dataset.split.cold_items.size() << " cold";
    if (prep.skipped_edge_endpoints)
        std::cout << ", " << prep.skipped_edge_endpoints << " unknown edge endpoints skipped";
    if (!prep.isolated_items.empty())
        std::cout << ", " << prep.isolated_items.size() << " isolated items";
    std::cout << " -> " << out << '\n';
    return 0;
}

int run_pretrain(const std::string& data_dir, const CouplingConfig& cfg, const std::string& out) {
    Dataset data = load_dataset(data_dir);
    LockGuard lock(out);
    write_config_file(out + "/config.resolved", cfg.to_kv());
    ModelBundle models = ModelBundle::create(cfg, data.interactions.n_tags,
                                             static_cast<int>(data.content.vocab.size()));
    Rng rng(cfg.seed);
    models.init(rng);
    auto history = pretrain(models, data);
    models.save(out + "/pretrain.ckpt");
    std::ofstream(out + "/pretrain_losses.csv") << format_csv(history);
    if (!history.empty())
        std::cout << "pretrain: " << history.size() << " epochs, final item loss "
                  << history.back().item_loss << '\n';
    std::cout << "pretrain checkpoint -> " << out << "/pretrain.ckpt\n";
    return 0;
}

int run_train(const std::string& data_dir, const CouplingConfig& cfg, const std::string& init_ckpt,
              const std::string& out) {
    Dataset data = load_dataset(data_dir);
    LockGuard lock(out);
    write_config_file(out + "/config.resolved", cfg.to_kv());
    ModelBundle models;
    if (!init_ckpt.empty()) {
        models = ModelBundle::load(init_ckpt);
        models.config = cfg;
    } else {
        models = ModelBundle::create(cfg, data.interactions.n_tags,
                                     static_cast<int>(data.content.vocab.size()));
        Rng rng(cfg.seed);
        models.init(rng);
        if (cfg.pretrain_epochs > 0) pretrain(models, data);
    }
    TrainState state = train(models, data, out);
    std::cout << "train: " << state.history.size() << " epochs, best epoch " << state.best_epoch
              << " (val recall@" << cfg.eval_n << " = " << state.best_recall << ")\n";
    std::cout << "checkpoints -> " << out << "/{best,final}.ckpt\n";
    return 0;
}

int run_evaluate(const std::string& data_dir, const std::string& model_path, int n,
                 const std::string& segment, const std::string& format, int threads) {
    Dataset data = load_dataset(data_dir);
    ModelBundle models = ModelBundle::load(model_path);
    std::vector<EvalReport> reports;
    if (segment == "existing" || segment == "both")
        reports.push_back(evaluate(data, models, n, Segment::Existing, TruthPart::Test, threads));
    if (segment == "cold" || segment == "both") {
        if (models.config.mode == CouplingMode::Collab)
            std::cerr << "note: skipping cold segment, collab mode has no cold path\n";
        else
            reports.push_back(evaluate(data, models, n, Segment::Cold, TruthPart::Test, threads));
    }
    std::cout << (format == "csv" ? report_csv(reports) : report_table(reports));
    return 0;
}

int run_recommend(const std::string& data_dir, const std::string& model_path,
                  const std::string& item_id, int top, bool explain) {
    Dataset data = load_dataset(data_dir);
    ModelBundle models = ModelBundle::load(model_path);
    IdMap items, tags;
    bool have_maps = fs::exists(data_dir + "/items.map") && fs::exists(data_dir + "/tags.map");
    if (have_maps) {
        items = load_id_map(data_dir + "/items.map");
        tags = load_id_map(data_dir + "/tags.map");
    }
    int item = -1;
    if (have_maps && items.index.count(item_id)) {
        item = items.index.at(item_id);
    } else {
        try {
            item = std::stoi(item_id);
        } catch (...) {
            throw DataError("unknown item '" + item_id + "'");
        }
    }
    if (item < 0 || item >= data.interactions.n_items)
        throw DataError("item id out of range: " + item_id);

    bool cold = data.split.is_cold(item);
    Vec scores = cold ? predict_cold(item, models, data) : predict_existing(item, models, data);
    const auto& exclude = data.split.train[static_cast<std::size_t>(item)];
    RankedList ranked = rank_top_n(item, scores, exclude, top);

    std::cout << "item " << item_id << (cold ? " (cold)" : "") << '\n';
    for (std::size_t r = 0; r < ranked.tags.size(); ++r) {
        int t = ranked.tags[r];
        std::cout << "  " << (r + 1) << ". "
                  << (have_maps ? tags.names[static_cast<std::size_t>(t)] : std::to_string(t))
                  << "  (" << ranked.scores[r] << ")\n";
    }
    if (explain) {
        const auto& row = data.content.rows[static_cast<std::size_t>(item)];
        std::vector<std::pair<int, double>> terms(row.begin(), row.end());
        std::stable_sort(terms.begin(), terms.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        std::cout << "top content terms:";
        for (std::size_t i = 0; i < std::min<std::size_t>(8, terms.size()); ++i)
            std::cout << ' ' << data.content.vocab[static_cast<std::size_t>(terms[i].first)];
        std::cout << '\n';
        const auto& cfg = models.config;
        SubGraph sub =
            sample_subgraph(data.graph, {item}, {cfg.fanout1, cfg.fanout2}, data.content,
                            Rng(cfg.seed).substream("social.eval"), cold);
        std::cout << "sampled neighbors:";
        for (int nb : sub.hop1.at(item))
            std::cout << ' '
                      << (have_maps ? items.names[static_cast<std::size_t>(nb)]
                                    : std::to_string(nb));
        std::cout << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MA-CVAE tag recommender"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic raw corpus");
    SynthOptions sopts;
    std::string synth_out = "raw";
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--items", sopts.n_items);
    synth->add_option("--tags", sopts.n_tags);
    synth->add_option("--clusters", sopts.n_clusters);
    synth->add_option("--users", sopts.n_users);
    synth->add_option("--tag-noise", sopts.tag_noise);
    synth->add_option("--edge-noise", sopts.edge_noise);
    synth->add_option("--seed", sopts.seed);

    // prepare
    auto* prepare = app.add_subcommand("prepare", "densify and split a raw corpus");
    std::string prep_raw, prep_out = "data";
    PrepareOptions popts;
    prepare->add_option("--raw", prep_raw, "raw corpus directory")->required();
    prepare->add_option("--out", prep_out, "prepared dataset directory");
    prepare->add_option("--min-tag-count", popts.min_tag_count);
    prepare->add_option("--vocab-size", popts.vocab_size);
    prepare->add_option("--co-threshold", popts.co_threshold);
    prepare->add_option("--cold", popts.n_cold, "number of cold holdout items");
    prepare->add_option("--valid-ratio", popts.valid_ratio);
    prepare->add_option("--test-ratio", popts.test_ratio);
    prepare->add_option("--seed", popts.seed);

    // shared train-ish options
    std::string data_dir, out_dir = "run", config_path, init_ckpt;
    std::vector<std::string> overrides;

    auto* pre = app.add_subcommand("pretrain", "independent warmup of each model");
    pre->add_option("--data", data_dir, "prepared dataset directory")->required();
    pre->add_option("--out", out_dir, "output directory");
    pre->add_option("--config", config_path, "key=value config file");
    pre->add_option("--set", overrides, "override config keys (key=value)");

    auto* train_cmd = app.add_subcommand("train", "block coordinate ascent training");
    train_cmd->add_option("--data", data_dir, "prepared dataset directory")->required();
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--config", config_path, "key=value config file");
    train_cmd->add_option("--set", overrides, "override config keys (key=value)");
    train_cmd->add_option("--init", init_ckpt, "start from this checkpoint (skips pretraining)");

    auto* eval_cmd = app.add_subcommand("evaluate", "ranking metrics on the held-out tags");
    std::string model_path, segment = "both", format = "table";
    int top_n = 20;
    int threads = env_threads();
    eval_cmd->add_option("--data", data_dir, "prepared dataset directory")->required();
    eval_cmd->add_option("--model", model_path, "checkpoint to evaluate")->required();
    eval_cmd->add_option("--n", top_n, "cutoff for recall/ndcg/mrr");
    eval_cmd->add_option("--segment", segment)->check(CLI::IsMember({"existing", "cold", "both"}));
    eval_cmd->add_option("--format", format)->check(CLI::IsMember({"table", "csv"}));
    eval_cmd->add_option("--threads", threads, "evaluation threads (MAVAE_THREADS)");

    auto* rec = app.add_subcommand("recommend", "top tags for one item");
    std::string item_id;
    int rec_top = 10;
    bool explain = false;
    rec->add_option("--data", data_dir, "prepared dataset directory")->required();
    rec->add_option("--model", model_path, "checkpoint")->required();
    rec->add_option("--item", item_id, "item id (external or dense)")->required();
    rec->add_option("--top", rec_top, "number of tags");
    rec->add_flag("--explain", explain, "show content terms and sampled neighbors");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(sopts, synth_out);
        if (prepare->parsed()) return run_prepare(prep_raw, popts, prep_out);
        if (pre->parsed()) return run_pretrain(data_dir, resolve_config(config_path, overrides),
                                               out_dir);
        if (train_cmd->parsed())
            return run_train(data_dir, resolve_config(config_path, overrides), init_ckpt, out_dir);
        if (eval_cmd->parsed())
            return run_evaluate(data_dir, model_path, top_n, segment, format, threads);
        if (rec->parsed()) return run_recommend(data_dir, model_path, item_id, rec_top, explain);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
