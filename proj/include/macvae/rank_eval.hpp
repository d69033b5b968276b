#pragma once

#include <string>
#include <vector>

#include "macvae/coupling.hpp"

namespace macvae {

struct RankedList {
    int item = -1;
    std::vector<int> tags;   // descending score, ties broken by ascending id
    std::vector<double> scores;
};

enum class Segment { Existing, Cold };
enum class TruthPart { Valid, Test };

struct EvalReport {
    int n = 0;
    double recall = 0.0;
    double ndcg = 0.0;
    double mrr = 0.0;
    int item_count = 0;
    int skipped = 0;  // items with empty truth
    std::string segment;
};

// Sum of the two decoder probability vectors: pi(mu_v) + pi(fused aux mean).
// Collab mode uses the first term only.
Vec predict_existing(int item, const ModelBundle& models, const Dataset& data);

// Cold path: decode the fused auxiliary mean; the social mean comes from
// inductive encoding over intrinsic edges only (self feature when isolated).
Vec predict_cold(int item, const ModelBundle& models, const Dataset& data);

// Social posterior mean through the deterministic evaluation sampler.
GaussianParams social_posterior(int item, const ModelBundle& models, const Dataset& data,
                                bool intrinsic_only);

// Top-n ranking of `scores` with the item's exclusions removed.
RankedList rank_top_n(int item, const Vec& scores, const std::vector<int>& exclude, int n);

// Truth lists must be sorted ascending (as the split stores them).
double recall_at_n(const RankedList& ranked, const std::vector<int>& truth);
// Literal convention: DCG / (|truth| / ln 2); `standard` switches to the
// ideal-DCG normalizer.
double ndcg_at_n(const RankedList& ranked, const std::vector<int>& truth, bool standard = false);
double mrr_at_n(const RankedList& ranked, const std::vector<int>& truth);

EvalReport evaluate(const Dataset& data, const ModelBundle& models, int n, Segment segment,
                    TruthPart truth = TruthPart::Test, int threads = 1);

std::string report_csv(const std::vector<EvalReport>& reports);
std::string report_table(const std::vector<EvalReport>& reports);

}  // namespace macvae
