#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "macvae/rank_eval.hpp"
#include "macvae/synth.hpp"

using namespace macvae;

namespace {

Dataset small_dataset(std::uint64_t seed = 3) {
    SynthOptions sopts;
    sopts.n_items = 40;
    sopts.n_tags = 16;
    sopts.n_clusters = 4;
    sopts.n_users = 20;
    sopts.seed = seed;
    PrepareOptions popts;
    popts.min_tag_count = 1;
    popts.vocab_size = 80;
    popts.co_threshold = 3;
    popts.n_cold = 4;
    popts.seed = seed;
    return prepare_dataset(generate_synthetic(sopts), popts).dataset;
}

ModelBundle small_bundle(const Dataset& data, CouplingMode mode, bool init = true) {
    CouplingConfig cfg;
    cfg.latent_dim = 4;
    cfg.collab_hidden = 8;
    cfg.content_hidden = 6;
    cfg.social_hidden = 6;
    cfg.fanout1 = 3;
    cfg.fanout2 = 3;
    cfg.mode = mode;
    ModelBundle b = ModelBundle::create(cfg, data.interactions.n_tags,
                                        static_cast<int>(data.content.vocab.size()));
    if (init) {
        Rng rng(9);
        b.init(rng);
    }
    return b;
}

// independent reference metrics
double ref_recall(const std::vector<int>& top, const std::set<int>& truth) {
    if (truth.empty()) return 0.0;
    int hits = 0;
    for (int t : top) hits += truth.count(t);
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ref_ndcg(const std::vector<int>& top, const std::set<int>& truth) {
    if (truth.empty()) return 0.0;
    double dcg = 0.0;
    for (std::size_t r = 0; r < top.size(); ++r)
        if (truth.count(top[r])) dcg += std::log(2.0) / std::log(static_cast<double>(r) + 2.0);
    return std::min(1.0, dcg * std::log(2.0) / static_cast<double>(truth.size()));
}

double ref_mrr(const std::vector<int>& top, const std::set<int>& truth) {
    for (std::size_t r = 0; r < top.size(); ++r)
        if (truth.count(top[r])) return 1.0 / static_cast<double>(r + 1);
    return 0.0;
}

}  // namespace

TEST_CASE("recall direct counts") {
    RankedList rl;
    rl.tags = {1, 2};
    CHECK(recall_at_n(rl, {2, 3}) == 0.5);
    rl.tags = {5, 2, 9};
    CHECK(recall_at_n(rl, {2, 9}) == 1.0);
    CHECK(recall_at_n(rl, {}) == 0.0);
}

TEST_CASE("ndcg single hit at rank one under the recorded convention") {
    RankedList rl;
    rl.tags = {7, 3, 4};
    CHECK(ndcg_at_n(rl, {7}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(ndcg_at_n(rl, {}) == 0.0);
    CHECK(ndcg_at_n(rl, {99}) == 0.0);
}

TEST_CASE("ndcg rank-discount monotonicity") {
    RankedList early;
    early.tags = {1, 2, 5};
    RankedList late;
    late.tags = {1, 5, 2};
    std::vector<int> truth = {1, 2};
    CHECK(ndcg_at_n(early, truth) > ndcg_at_n(late, truth));
}

TEST_CASE("ndcg standard normalizer reaches one on a perfect list") {
    RankedList rl;
    rl.tags = {4, 9, 1};
    CHECK(ndcg_at_n(rl, {1, 4, 9}, true) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mrr hand cases") {
    RankedList rl;
    rl.tags = {4, 6, 8, 2};
    CHECK(mrr_at_n(rl, {8}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(mrr_at_n(rl, {99}) == 0.0);
}

TEST_CASE("metrics match brute force on random instances") {
    Rng rng(77);
    for (int inst = 0; inst < 1000; ++inst) {
        int n_tags = 10 + rng.uniform_int(30);
        Vec scores(static_cast<std::size_t>(n_tags));
        for (auto& s : scores) s = rng.uniform_int(8);  // ties on purpose
        std::set<int> truth_set, exclude_set;
        for (int k = 0; k < 5; ++k) truth_set.insert(rng.uniform_int(n_tags));
        for (int k = 0; k < 3; ++k) exclude_set.insert(rng.uniform_int(n_tags));
        for (int e : exclude_set) truth_set.erase(e);
        std::vector<int> truth(truth_set.begin(), truth_set.end());
        std::vector<int> exclude(exclude_set.begin(), exclude_set.end());
        int n = 1 + rng.uniform_int(n_tags);

        RankedList rl = rank_top_n(0, scores, exclude, n);

        // brute-force ranking: stable sort of candidates by (-score, id)
        std::vector<int> cand;
        for (int t = 0; t < n_tags; ++t)
            if (!exclude_set.count(t)) cand.push_back(t);
        std::sort(cand.begin(), cand.end(), [&](int a, int b) {
            if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
                return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
            return a < b;
        });
        cand.resize(std::min<std::size_t>(cand.size(), static_cast<std::size_t>(n)));
        REQUIRE(rl.tags == cand);

        CHECK(recall_at_n(rl, truth) == ref_recall(cand, truth_set));
        CHECK(ndcg_at_n(rl, truth) == doctest::Approx(ref_ndcg(cand, truth_set)).epsilon(1e-12));
        CHECK(mrr_at_n(rl, truth) == ref_mrr(cand, truth_set));
    }
}

TEST_CASE("recall is monotone in the cutoff") {
    Rng rng(8);
    Vec scores(30);
    for (auto& s : scores) s = rng.uniform();
    std::vector<int> truth = {2, 11, 25};
    double prev = 0.0;
    for (int n = 1; n <= 30; ++n) {
        double r = recall_at_n(rank_top_n(0, scores, {}, n), truth);
        CHECK(r >= prev);
        prev = r;
    }
    CHECK(prev == 1.0);
}

TEST_CASE("zero models score every tag equally") {
    Dataset data = small_dataset();
    ModelBundle b = small_bundle(data, CouplingMode::Full, /*init=*/false);
    int item = data.split.existing_items()[0];
    Vec scores = predict_existing(item, b, data);
    for (double s : scores) CHECK(s == doctest::Approx(scores[0]).epsilon(1e-12));
    int cold = data.split.cold_items[0];
    Vec cold_scores = predict_cold(cold, b, data);
    for (double s : cold_scores)
        CHECK(s == doctest::Approx(1.0 / data.interactions.n_tags).epsilon(1e-12));
}

TEST_CASE("existing prediction is the hand-built sum of the two decoded terms") {
    Dataset data = small_dataset();
    ModelBundle b = small_bundle(data, CouplingMode::Full);
    int item = data.split.existing_items()[1];
    Vec scores = predict_existing(item, b, data);

    Vec row(static_cast<std::size_t>(data.interactions.n_tags), 0.0);
    for (int t : data.split.train[static_cast<std::size_t>(item)])
        row[static_cast<std::size_t>(t)] = 1.0;
    Vec mu_v = encode_ratings({row}, b.collab)[0].mean;
    Vec mu_c = encode_content({data.content.dense_row(item)}, b.content)[0].mean;
    Vec mu_s = social_posterior(item, b, data, false).mean;
    Vec fused = poe_fuse({mu_c, Vec(mu_c.size(), 0.0)}, {mu_s, Vec(mu_s.size(), 0.0)},
                         b.config.lambda_c, b.config.lambda_s)
                    .mean;
    Vec lp1 = decode_to_tag_logprobs({mu_v}, b.collab)[0];
    Vec lp2 = decode_to_tag_logprobs({fused}, b.collab)[0];
    for (std::size_t j = 0; j < scores.size(); ++j)
        CHECK(scores[j] == doctest::Approx(std::exp(lp1[j]) + std::exp(lp2[j])).epsilon(1e-12));

    // collaborative mode keeps only the first term
    ModelBundle bc = small_bundle(data, CouplingMode::Collab);
    bc.collab.params = b.collab.params;
    Vec collab_scores = predict_existing(item, bc, data);
    for (std::size_t j = 0; j < scores.size(); ++j)
        CHECK(collab_scores[j] == doctest::Approx(std::exp(lp1[j])).epsilon(1e-12));
}

TEST_CASE("cold prediction needs an auxiliary source") {
    Dataset data = small_dataset();
    ModelBundle b = small_bundle(data, CouplingMode::Collab);
    CHECK_THROWS_AS(predict_cold(data.split.cold_items[0], b, data), ConfigError);
}

TEST_CASE("cold path equals the intrinsic-filtered normal path") {
    Dataset data = small_dataset();
    ModelBundle b = small_bundle(data, CouplingMode::Full);
    for (int item = 0; item < data.interactions.n_items; ++item) {
        // restrict to nodes whose whole 2-hop intrinsic neighborhood carries no
        // extrinsic edges, where the filter cannot change the sample
        auto nbrs = data.graph.neighbors(item, false);
        if (nbrs != data.graph.neighbors(item, true)) continue;
        bool pure = true;
        for (int u : nbrs)
            if (data.graph.neighbors(u, false) != data.graph.neighbors(u, true)) pure = false;
        if (!pure) continue;
        GaussianParams a = social_posterior(item, b, data, true);
        GaussianParams c = social_posterior(item, b, data, false);
        CHECK(a.mean == c.mean);
        CHECK(a.logvar == c.logvar);
    }
}

TEST_CASE("evaluate averages per-item metrics and skips empty truth") {
    Dataset data = small_dataset();
    ModelBundle b = small_bundle(data, CouplingMode::Full);
    EvalReport rep = evaluate(data, b, 5, Segment::Existing, TruthPart::Test);
    // recompute from the per-item pieces
    double recall = 0.0;
    int count = 0;
    for (int item : data.split.existing_items()) {
        const auto& truth = data.split.test[static_cast<std::size_t>(item)];
        if (truth.empty()) continue;
        Vec scores = predict_existing(item, b, data);
        RankedList rl = rank_top_n(item, scores, data.split.train[static_cast<std::size_t>(item)], 5);
        recall += recall_at_n(rl, truth);
        ++count;
    }
    CHECK(rep.item_count == count);
    CHECK(rep.recall == doctest::Approx(recall / count).epsilon(1e-12));
}

TEST_CASE("threaded evaluation matches single-threaded exactly") {
    Dataset data = small_dataset();
    ModelBundle b = small_bundle(data, CouplingMode::Full);
    EvalReport one = evaluate(data, b, 5, Segment::Existing, TruthPart::Test, 1);
    EvalReport four = evaluate(data, b, 5, Segment::Existing, TruthPart::Test, 4);
    CHECK(one.recall == four.recall);
    CHECK(one.ndcg == four.ndcg);
    CHECK(one.mrr == four.mrr);
    EvalReport cold1 = evaluate(data, b, 5, Segment::Cold, TruthPart::Test, 1);
    EvalReport cold3 = evaluate(data, b, 5, Segment::Cold, TruthPart::Test, 3);
    CHECK(cold1.recall == cold3.recall);
}

TEST_CASE("excluded training tags never appear in a ranking") {
    Dataset data = small_dataset();
    ModelBundle b = small_bundle(data, CouplingMode::Full);
    for (int item : data.split.existing_items()) {
        Vec scores = predict_existing(item, b, data);
        const auto& train = data.split.train[static_cast<std::size_t>(item)];
        RankedList rl = rank_top_n(item, scores, train, 10);
        for (int t : rl.tags) CHECK(!std::binary_search(train.begin(), train.end(), t));
    }
}

TEST_CASE("report formats include every segment row") {
    EvalReport a;
    a.segment = "existing";
    a.n = 10;
    a.recall = 0.25;
    EvalReport b;
    b.segment = "cold";
    b.n = 10;
    std::string csv = report_csv({a, b});
    CHECK(csv.find("existing,10") != std::string::npos);
    CHECK(csv.find("cold,10") != std::string::npos);
    std::string table = report_table({a, b});
    CHECK(table.find("existing") != std::string::npos);
    CHECK(table.find("0.25") != std::string::npos);
}
