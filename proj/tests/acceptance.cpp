// Acceptance gate: one test case per release criterion, each printing a
// single PASS/FAIL line. Tolerances are stated inline.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "macvae/coupling.hpp"
#include "macvae/rank_eval.hpp"
#include "macvae/synth.hpp"
#include "test_util.hpp"

using namespace macvae;

namespace {

void verdict(const char* name, bool ok) {
    std::printf("[acceptance] %s: %s\n", name, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    CHECK_MESSAGE(ok, name);
}

// ---- shared synthetic dataset and training runs ---------------------------

Dataset& bench_dataset() {
    static Dataset data = [] {
        SynthOptions sopts;
        sopts.n_items = 500;
        sopts.n_tags = 80;
        sopts.n_clusters = 8;
        sopts.n_users = 200;
        sopts.seed = 101;
        PrepareOptions popts;
        popts.min_tag_count = 3;
        popts.vocab_size = 400;
        popts.co_threshold = 4;
        popts.n_cold = 50;
        popts.seed = 101;
        return prepare_dataset(generate_synthetic(sopts), popts).dataset;
    }();
    return data;
}

CouplingConfig bench_config(CouplingMode mode, std::uint64_t seed) {
    CouplingConfig cfg;
    cfg.mode = mode;
    cfg.seed = seed;
    cfg.latent_dim = 16;
    cfg.collab_hidden = 64;
    cfg.content_hidden = 32;
    cfg.social_hidden = 32;
    cfg.fanout1 = 5;
    cfg.fanout2 = 5;
    cfg.walks_per_node = 3;
    cfg.lr_item = 1e-3;
    cfg.lr_content = 1e-3;
    cfg.lr_social = 5e-3;
    cfg.lr_pretrain = 1e-3;
    cfg.epochs = 100;
    cfg.pretrain_epochs = 10;
    cfg.eval_n = 10;
    cfg.patience = 0;
    return cfg;
}

struct AblationRun {
    double existing_recall10 = 0.0;
    double cold_recall10 = 0.0;
};

AblationRun run_mode(CouplingMode mode, std::uint64_t seed) {
    Dataset& data = bench_dataset();
    ModelBundle models = ModelBundle::create(bench_config(mode, seed), data.interactions.n_tags,
                                             static_cast<int>(data.content.vocab.size()));
    Rng rng(seed);
    models.init(rng);
    pretrain(models, data);
    TrainState st = train(models, data);
    const ModelBundle& best = st.best ? *st.best : models;
    AblationRun out;
    out.existing_recall10 = evaluate(data, best, 10, Segment::Existing).recall;
    if (mode != CouplingMode::Collab)
        out.cold_recall10 = evaluate(data, best, 10, Segment::Cold).recall;
    return out;
}

struct AblationTable {
    double full_existing = 0.0, content_existing = 0.0, collab_existing = 0.0;
    double full_cold = 0.0;
};

AblationTable& ablation_table() {
    static AblationTable t = [] {
        AblationTable out;
        const std::uint64_t seeds[3] = {101, 102, 103};
        for (std::uint64_t s : seeds) {
            AblationRun full = run_mode(CouplingMode::Full, s);
            out.full_existing += full.existing_recall10 / 3.0;
            out.full_cold += full.cold_recall10 / 3.0;
            out.content_existing += run_mode(CouplingMode::Content, s).existing_recall10 / 3.0;
            out.collab_existing += run_mode(CouplingMode::Collab, s).existing_recall10 / 3.0;
        }
        return out;
    }();
    return t;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

// 1. Every block objective matches central finite differences (rel err < 1e-4)
//    on random micro instances, 100 seeds.
TEST_CASE("criterion 1: gradient suite") {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 34; ++seed) {
        MultVAEModel m = MultVAEModel::create(4, 3, 2);
        Rng rng(1000 + seed);
        m.init(rng);
        std::vector<Vec> rows = {{1, 0, 1, 0}, {0, 1, 1, 1}};
        std::vector<Vec> noise = {rng.normal_vec(2), rng.normal_vec(2)};
        std::vector<Vec> mu_c = {rng.normal_vec(2), rng.normal_vec(2)};
        std::vector<Vec> mu_s = {rng.normal_vec(2), rng.normal_vec(2)};
        CollabOptions opts;
        auto loss = [&]() { return item_objective(rows, mu_c, mu_s, 2.0, 3.0, noise, m, opts); };
        worst = std::max(worst, testutil::max_fd_rel_err(m.params, loss));
    }
    for (std::uint64_t seed = 0; seed < 33; ++seed) {
        ContentVAEModel m = ContentVAEModel::create(6, 3, 2);
        Rng rng(2000 + seed);
        m.init(rng);
        std::vector<Vec> rows = {{0.5, 0, 0.2, 0.1, 0, 0.3}, {0, 0.4, 0, 0.6, 0.1, 0}};
        std::vector<Vec> noise = {rng.normal_vec(2), rng.normal_vec(2)};
        std::vector<Vec> v_hat = {rng.normal_vec(2), rng.normal_vec(2)};
        auto loss = [&]() { return content_objective(rows, v_hat, 3.0, noise, m); };
        worst = std::max(worst, testutil::max_fd_rel_err(m.params, loss));
    }
    {
        SocialGraph g;
        g.n_items = 5;
        g.adjacency.resize(5);
        g.add_edge(0, 1, kIntrinsic);
        g.add_edge(1, 2, kIntrinsic);
        g.add_edge(2, 3, kIntrinsic);
        g.add_edge(3, 4, kIntrinsic);
        g.add_edge(0, 4, kExtrinsic);
        ContentFeatures f;
        f.n_items = 5;
        f.vocab.resize(5);
        f.rows.resize(5);
        for (int i = 0; i < 5; ++i) f.rows[static_cast<std::size_t>(i)] = {{i, 1.0}};
        for (std::uint64_t seed = 0; seed < 33; ++seed) {
            SocialVGAEModel m = SocialVGAEModel::create(5, 3, 2);
            Rng rng(3000 + seed);
            m.init(rng);
            auto trips = sample_triplets(g, 2, 2, Rng(seed));
            std::vector<int> seeds = {0, 1, 2, 3, 4};
            SubGraph sub = sample_subgraph(g, seeds, {3, 3}, f, Rng(seed + 1));
            std::vector<Vec> noise, v_hat;
            for (int i = 0; i < 5; ++i) {
                noise.push_back(rng.normal_vec(2));
                v_hat.push_back(rng.normal_vec(2));
            }
            auto loss = [&]() { return social_objective(trips, sub, v_hat, 2.5, noise, m); };
            worst = std::max(worst, testutil::max_fd_rel_err(m.params, loss));
        }
    }
    verdict("gradient suite (100 seeds, rel err < 1e-4)", worst < 1e-4);
}

// 2. Closed-form oracles: KL vs Monte-Carlo within 3 SE; poe_fuse vs the
//    precision-weighted average exactly; multinomial NLL argmin at pi ~ r.
TEST_CASE("criterion 2: closed-form oracles") {
    bool ok = true;
    {
        Rng rng(11);
        Vec mu(4), lv(4);
        for (auto& v : mu) v = rng.uniform(-1.0, 1.0);
        for (auto& v : lv) v = rng.uniform(-1.0, 1.0);
        double exact = gaussian_kl(GaussianParams{mu, lv});
        const int n = 1000000;
        double sum = 0.0, sumsq = 0.0;
        for (int s = 0; s < n; ++s) {
            double term = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                double sd = std::exp(0.5 * lv[k]);
                double z = mu[k] + sd * rng.normal();
                term += -0.5 * lv[k] - 0.5 * (z - mu[k]) * (z - mu[k]) / (sd * sd) + 0.5 * z * z;
            }
            sum += term;
            sumsq += term * term;
        }
        double mean = sum / n;
        double se = std::sqrt((sumsq / n - mean * mean) / n);
        ok = ok && std::abs(mean - exact) < 3.0 * se;
    }
    {
        Rng rng(12);
        for (int inst = 0; inst < 50; ++inst) {
            Vec mc = rng.normal_vec(3), ms = rng.normal_vec(3);
            double lc = rng.uniform(0.1, 5.0), ls = rng.uniform(0.1, 5.0);
            GaussianParams q = poe_fuse({mc, Vec(3, 0.0)}, {ms, Vec(3, 0.0)}, lc, ls);
            for (int k = 0; k < 3; ++k) {
                std::size_t i = static_cast<std::size_t>(k);
                double expect = (mc[i] * lc + ms[i] * ls) / (lc + ls);
                ok = ok && q.mean[i] == expect;
                ok = ok && q.logvar[i] == -std::log(lc + ls);
            }
        }
    }
    {
        Vec row = {3, 1, 2};
        double best = 1e300;
        Vec best_pi;
        int steps = 120;
        for (int a = 1; a < steps; ++a)
            for (int b = 1; a + b < steps; ++b) {
                double pa = static_cast<double>(a) / steps, pb = static_cast<double>(b) / steps;
                Vec lp = {std::log(pa), std::log(pb), std::log(1.0 - pa - pb)};
                double nll = multinomial_nll(lp, row);
                if (nll < best) {
                    best = nll;
                    best_pi = {pa, pb, 1.0 - pa - pb};
                }
            }
        ok = ok && std::abs(best_pi[0] - 0.5) < 0.02 && std::abs(best_pi[1] - 1.0 / 6.0) < 0.02 &&
             std::abs(best_pi[2] - 1.0 / 3.0) < 0.02;
    }
    verdict("closed-form oracles (KL MC, poe exact, NLL argmin)", ok);
}

// 3. Metrics equal brute-force implementations on 1,000 random instances.
TEST_CASE("criterion 3: metric oracles") {
    bool ok = true;
    Rng rng(13);
    for (int inst = 0; inst < 1000 && ok; ++inst) {
        int n_tags = 10 + rng.uniform_int(40);
        Vec scores(static_cast<std::size_t>(n_tags));
        for (auto& s : scores) s = rng.uniform_int(10);
        std::set<int> truth_set, exclude_set;
        for (int k = 0; k < 6; ++k) truth_set.insert(rng.uniform_int(n_tags));
        for (int k = 0; k < 4; ++k) exclude_set.insert(rng.uniform_int(n_tags));
        for (int e : exclude_set) truth_set.erase(e);
        std::vector<int> truth(truth_set.begin(), truth_set.end());
        std::vector<int> exclude(exclude_set.begin(), exclude_set.end());
        int n = 1 + rng.uniform_int(n_tags);
        RankedList rl = rank_top_n(0, scores, exclude, n);

        std::vector<int> cand;
        for (int t = 0; t < n_tags; ++t)
            if (!exclude_set.count(t)) cand.push_back(t);
        std::sort(cand.begin(), cand.end(), [&](int a, int b) {
            double sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
            return sa != sb ? sa > sb : a < b;
        });
        cand.resize(std::min<std::size_t>(cand.size(), static_cast<std::size_t>(n)));
        ok = ok && rl.tags == cand;

        int hits = 0;
        double dcg = 0.0, rr = 0.0;
        for (std::size_t r = 0; r < cand.size(); ++r)
            if (truth_set.count(cand[r])) {
                ++hits;
                dcg += std::log(2.0) / std::log(static_cast<double>(r) + 2.0);
                if (rr == 0.0) rr = 1.0 / static_cast<double>(r + 1);
            }
        double recall = truth.empty() ? 0.0 : static_cast<double>(hits) / truth.size();
        double ndcg = truth.empty()
                          ? 0.0
                          : std::min(1.0, dcg * std::log(2.0) / static_cast<double>(truth.size()));
        ok = ok && recall_at_n(rl, truth) == recall;
        ok = ok && std::abs(ndcg_at_n(rl, truth) - ndcg) < 1e-12;
        ok = ok && mrr_at_n(rl, truth) == rr;
    }
    verdict("metric oracles (1000 instances, exact)", ok);
}

// 4. Ablation ordering on the seeded synthetic benchmark, averaged over
//    3 seeds: full >= content-only >= collaborative-only and
//    full - collab >= 0.03 absolute Recall@10.
TEST_CASE("criterion 4: ablation ordering") {
    const AblationTable& t = ablation_table();
    std::printf("[acceptance]   recall@10 existing: full=%.4f content=%.4f collab=%.4f\n",
                t.full_existing, t.content_existing, t.collab_existing);
    bool ok = t.full_existing >= t.content_existing &&
              t.content_existing >= t.collab_existing &&
              t.full_existing - t.collab_existing >= 0.03;
    verdict("ablation ordering (full >= content >= collab, margin >= 0.03)", ok);
}

// 5. Cold-start: synthetic cold items reach Recall@10 >= 5x the random
//    baseline 10/80, averaged over the same 3 seeds.
TEST_CASE("criterion 5: cold-start recall") {
    const AblationTable& t = ablation_table();
    double baseline = 10.0 / 80.0;
    std::printf("[acceptance]   recall@10 cold: full=%.4f (threshold %.4f)\n", t.full_cold,
                5.0 * baseline);
    verdict("cold-start recall >= 5x random baseline", t.full_cold >= 5.0 * baseline);
}

// 6. Inductive invariant: encoding any node through the cold path equals
//    encoding it on the intrinsic-only restriction of the graph, exactly.
TEST_CASE("criterion 6: inductive invariant") {
    Dataset& data = bench_dataset();
    ModelBundle models = ModelBundle::create(bench_config(CouplingMode::Full, 101),
                                             data.interactions.n_tags,
                                             static_cast<int>(data.content.vocab.size()));
    Rng rng(5);
    models.init(rng);

    // graph restricted to intrinsic edges, rebuilt as a standalone graph
    Dataset restricted = data;
    SocialGraph intr;
    intr.n_items = data.graph.n_items;
    intr.adjacency.resize(static_cast<std::size_t>(intr.n_items));
    for (int a = 0; a < data.graph.n_items; ++a)
        for (int b : data.graph.neighbors(a, true))
            if (a < b) intr.add_edge(a, b, kIntrinsic);
    restricted.graph = intr;

    bool ok = true;
    for (int item = 0; item < data.graph.n_items && ok; ++item) {
        GaussianParams cold = social_posterior(item, models, data, /*intrinsic_only=*/true);
        GaussianParams normal = social_posterior(item, models, restricted, false);
        ok = cold.mean == normal.mean && cold.logvar == normal.logvar;
    }
    verdict("inductive invariant (cold path == intrinsic restriction, exact)", ok);
}

// 7. Determinism: two full train runs with the same seed/config produce
//    bit-identical loss CSVs and checkpoints.
TEST_CASE("criterion 7: determinism") {
    Dataset& data = bench_dataset();
    CouplingConfig cfg = bench_config(CouplingMode::Full, 77);
    cfg.epochs = 8;
    cfg.pretrain_epochs = 2;
    std::string d1 = "/tmp/macvae_acc_det1", d2 = "/tmp/macvae_acc_det2";
    for (const auto& dir : {d1, d2}) {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        ModelBundle models = ModelBundle::create(cfg, data.interactions.n_tags,
                                                 static_cast<int>(data.content.vocab.size()));
        Rng rng(cfg.seed);
        models.init(rng);
        pretrain(models, data);
        train(models, data, dir);
    }
    bool ok = true;
    for (const char* f : {"losses.csv", "final.ckpt", "best.ckpt"})
        ok = ok && !read_bytes(d1 + "/" + f).empty() &&
             read_bytes(d1 + "/" + f) == read_bytes(d2 + "/" + f);
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
    verdict("determinism (bit-identical CSVs and checkpoints)", ok);
}

// 8. Block isolation: each block objective is exactly insensitive to the
//    other blocks' parameters (finite perturbation probe).
TEST_CASE("criterion 8: block isolation") {
    Dataset& data = bench_dataset();
    CouplingConfig cfg = bench_config(CouplingMode::Full, 55);
    ModelBundle models = ModelBundle::create(cfg, data.interactions.n_tags,
                                             static_cast<int>(data.content.vocab.size()));
    Rng rng(55);
    models.init(rng);

    auto items = data.split.existing_items();
    items.resize(8);
    InteractionMatrix train_rows = data.train_interactions();
    std::vector<Vec> rating_rows, content_rows, noise, aux;
    for (int i : items) {
        rating_rows.push_back(train_rows.dense_row(i));
        content_rows.push_back(data.content.dense_row(i));
        noise.push_back(rng.normal_vec(cfg.latent_dim));
        aux.push_back(rng.normal_vec(cfg.latent_dim));
    }
    SubGraph sub = sample_subgraph(data.graph, items, {cfg.fanout1, cfg.fanout2}, data.content,
                                   Rng(3));
    auto trips = sample_triplets(data.graph, 2, 1, Rng(4));
    std::vector<Triplet> local;
    std::set<int> item_set(items.begin(), items.end());
    for (const auto& tr : trips)
        if (item_set.count(tr.v) && item_set.count(tr.v_pos) && item_set.count(tr.v_neg))
            local.push_back(tr);

    CollabOptions copts;
    auto item_loss = [&]() {
        return item_objective(rating_rows, aux, aux, cfg.lambda_c, cfg.lambda_s, noise,
                              models.collab, copts);
    };
    auto content_loss = [&]() {
        return content_objective(content_rows, aux, cfg.lambda_c, noise, models.content);
    };
    auto social_loss = [&]() {
        std::vector<Vec> vhat, snoise;
        for (std::size_t i = 0; i < items.size(); ++i) {
            vhat.push_back(aux[i]);
            snoise.push_back(noise[i]);
        }
        SubGraph isub = sample_subgraph(data.graph, items, {cfg.fanout1, cfg.fanout2},
                                        data.content, Rng(3));
        return social_objective(local, isub, vhat, cfg.lambda_s, snoise, models.social);
    };

    auto perturb_and_check = [&](const std::function<double()>& loss, ParameterStore& other1,
                                 ParameterStore& other2) {
        double base = loss();
        bool flat = true;
        auto probe = [&](ParameterStore& store) {
            int stride = 0;
            for (auto& [name, slot] : store.slots_mut())
                for (std::size_t i = 0; i < slot.value.size(); i += 25 + static_cast<std::size_t>(stride++ % 7)) {
                    double orig = slot.value[i];
                    slot.value[i] = orig + 0.1;
                    if (loss() != base) flat = false;
                    slot.value[i] = orig;
                }
        };
        probe(other1);
        probe(other2);
        return flat;
    };

    bool ok = perturb_and_check(item_loss, models.content.params, models.social.params);
    ok = ok && perturb_and_check(content_loss, models.collab.params, models.social.params);
    ok = ok && perturb_and_check(social_loss, models.collab.params, models.content.params);
    verdict("block isolation (zero cross-block sensitivity)", ok);
}
