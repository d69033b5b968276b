#include "macvae/rank_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "macvae/errors.hpp"

namespace macvae {

namespace {

Vec exp_probs(const Vec& log_probs) {
    Vec out(log_probs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_probs[i]);
    return out;
}

// Mean of the auxiliary posterior the item decoder consumes for prediction:
// the fused product in full mode, the single available expert otherwise.
Vec aux_mean(int item, const ModelBundle& models, const Dataset& data, bool intrinsic_only) {
    const auto& cfg = models.config;
    bool want_c = cfg.use_content();
    bool want_s = cfg.use_social();
    if (!want_c && !want_s)
        throw ConfigError("no auxiliary posterior available in collab mode");
    GaussianParams q_c, q_s;
    if (want_c) {
        auto qs = encode_content({data.content.dense_row(item)}, models.content);
        q_c = std::move(qs.front());
    }
    if (want_s) q_s = social_posterior(item, models, data, intrinsic_only);
    if (want_c && want_s) return poe_fuse(q_c, q_s, cfg.lambda_c, cfg.lambda_s).mean;
    return want_c ? q_c.mean : q_s.mean;
}

}  // namespace

GaussianParams social_posterior(int item, const ModelBundle& models, const Dataset& data,
                                bool intrinsic_only) {
    const auto& cfg = models.config;
    Rng base = Rng(cfg.seed).substream("social.eval");
    SubGraph sub = sample_subgraph(data.graph, {item}, {cfg.fanout1, cfg.fanout2}, data.content,
                                   base, intrinsic_only);
    auto qs = encode_social(sub, models.social);
    return std::move(qs.front());
}

Vec predict_existing(int item, const ModelBundle& models, const Dataset& data) {
    const auto& cfg = models.config;
    Vec row(static_cast<std::size_t>(data.interactions.n_tags), 0.0);
    for (int t : data.split.train[static_cast<std::size_t>(item)])
        row[static_cast<std::size_t>(t)] = 1.0;
    auto q_v = encode_ratings({row}, models.collab, cfg.input_l2norm);
    Vec scores = exp_probs(decode_to_tag_logprobs({q_v.front().mean}, models.collab).front());
    if (cfg.mode != CouplingMode::Collab) {
        Vec aux = aux_mean(item, models, data, /*intrinsic_only=*/false);
        Vec aux_p = exp_probs(decode_to_tag_logprobs({aux}, models.collab).front());
        for (std::size_t j = 0; j < scores.size(); ++j) scores[j] += aux_p[j];
    }
    return scores;
}

Vec predict_cold(int item, const ModelBundle& models, const Dataset& data) {
    if (models.config.mode == CouplingMode::Collab)
        throw ConfigError("cold-start prediction needs content or social information");
    Vec aux = aux_mean(item, models, data, /*intrinsic_only=*/true);
    return exp_probs(decode_to_tag_logprobs({aux}, models.collab).front());
}

RankedList rank_top_n(int item, const Vec& scores, const std::vector<int>& exclude, int n) {
    RankedList out;
    out.item = item;
    std::vector<int> order;
    order.reserve(scores.size());
    for (int j = 0; j < static_cast<int>(scores.size()); ++j)
        if (!std::binary_search(exclude.begin(), exclude.end(), j)) order.push_back(j);
    int k = std::min<int>(n, static_cast<int>(order.size()));
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    out.tags.assign(order.begin(), order.begin() + k);
    out.scores.reserve(static_cast<std::size_t>(k));
    for (int j : out.tags) out.scores.push_back(scores[static_cast<std::size_t>(j)]);
    return out;
}

double recall_at_n(const RankedList& ranked, const std::vector<int>& truth) {
    if (truth.empty()) return 0.0;
    int hits = 0;
    for (int t : ranked.tags)
        if (std::binary_search(truth.begin(), truth.end(), t)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ndcg_at_n(const RankedList& ranked, const std::vector<int>& truth, bool standard) {
    if (truth.empty()) return 0.0;
    double dcg = 0.0;
    for (std::size_t r = 0; r < ranked.tags.size(); ++r)
        if (std::binary_search(truth.begin(), truth.end(), ranked.tags[r]))
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    double norm;
    if (standard) {
        std::size_t ideal = std::min(truth.size(), ranked.tags.size());
        norm = 0.0;
        for (std::size_t r = 0; r < ideal; ++r) norm += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        if (norm == 0.0) return 0.0;
    } else {
        norm = static_cast<double>(truth.size()) / std::log(2.0);
    }
    return std::min(1.0, dcg / norm);
}

double mrr_at_n(const RankedList& ranked, const std::vector<int>& truth) {
    for (std::size_t r = 0; r < ranked.tags.size(); ++r)
        if (std::binary_search(truth.begin(), truth.end(), ranked.tags[r]))
            return 1.0 / static_cast<double>(r + 1);
    return 0.0;
}

EvalReport evaluate(const Dataset& data, const ModelBundle& models, int n, Segment segment,
                    TruthPart part, int threads) {
    const auto& cfg = models.config;
    EvalReport rep;
    rep.n = n;
    rep.segment = segment == Segment::Existing ? "existing" : "cold";

    std::vector<int> items;
    std::vector<std::vector<int>> truths;
    if (segment == Segment::Existing) {
        const auto& rows = part == TruthPart::Valid ? data.split.valid : data.split.test;
        for (int i : data.split.existing_items()) {
            const auto& t = rows[static_cast<std::size_t>(i)];
            if (t.empty()) {
                ++rep.skipped;
                continue;
            }
            items.push_back(i);
            truths.push_back(t);
        }
    } else {
        // The ranking universe for cold items is limited to tags the model has
        // seen in some training row.
        std::vector<char> seen(static_cast<std::size_t>(data.interactions.n_tags), 0);
        for (const auto& row : data.split.train)
            for (int t : row) seen[static_cast<std::size_t>(t)] = 1;
        for (int i : data.split.cold_items) {
            std::vector<int> t;
            for (int tag : data.interactions.rows[static_cast<std::size_t>(i)])
                if (seen[static_cast<std::size_t>(tag)]) t.push_back(tag);
            if (t.empty()) {
                ++rep.skipped;
                continue;
            }
            items.push_back(i);
            truths.push_back(std::move(t));
        }
    }

    std::vector<double> recall(items.size()), ndcg(items.size()), mrr(items.size());
    auto eval_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            int item = items[k];
            Vec scores = segment == Segment::Existing ? predict_existing(item, models, data)
                                                      : predict_cold(item, models, data);
            static const std::vector<int> no_exclusions;
            const std::vector<int>& exclude = segment == Segment::Existing
                                                  ? data.split.train[static_cast<std::size_t>(item)]
                                                  : no_exclusions;
            RankedList ranked = rank_top_n(item, scores, exclude, n);
            recall[k] = recall_at_n(ranked, truths[k]);
            ndcg[k] = ndcg_at_n(ranked, truths[k], cfg.ndcg_standard);
            mrr[k] = mrr_at_n(ranked, truths[k]);
        }
    };
    if (threads <= 1 || items.size() < 2) {
        eval_range(0, items.size());
    } else {
        std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), items.size());
        std::vector<std::thread> pool;
        std::size_t chunk = (items.size() + nt - 1) / nt;
        for (std::size_t t = 0; t < nt; ++t) {
            std::size_t lo = t * chunk;
            std::size_t hi = std::min(items.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(eval_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    rep.item_count = static_cast<int>(items.size());
    if (!items.empty()) {
        // index-ordered reduction, identical regardless of thread count
        rep.recall = std::accumulate(recall.begin(), recall.end(), 0.0) / recall.size();
        rep.ndcg = std::accumulate(ndcg.begin(), ndcg.end(), 0.0) / ndcg.size();
        rep.mrr = std::accumulate(mrr.begin(), mrr.end(), 0.0) / mrr.size();
    }
    return rep;
}

std::string report_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "segment,n,items,skipped,recall,ndcg,mrr\n";
    for (const auto& r : reports) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.17g,%.17g,%.17g\n", r.segment.c_str(), r.n,
                      r.item_count, r.skipped, r.recall, r.ndcg, r.mrr);
        out << buf;
    }
    return out.str();
}

std::string report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %6s %6s %10s %10s %10s\n", "segment", "n", "items",
                  "recall", "ndcg", "mrr");
    out << buf;
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-10s %6d %6d %10.4f %10.4f %10.4f\n", r.segment.c_str(),
                      r.n, r.item_count, r.recall, r.ndcg, r.mrr);
        out << buf;
    }
    return out.str();
}

}  // namespace macvae
