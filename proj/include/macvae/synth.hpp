#pragma once

#include <string>
#include <vector>

#include "macvae/corpus.hpp"

namespace macvae {

// Raw ingestion inputs keyed by external ids, as read from the TSV files.
struct RawDataset {
    std::vector<std::pair<std::string, std::string>> interactions;  // item, tag
    std::vector<std::pair<std::string, std::vector<std::string>>> documents;
    std::vector<std::pair<std::string, std::string>> intrinsic_edges;
    std::vector<std::pair<std::string, std::string>> user_item;  // user, item
};

struct PrepareOptions {
    int min_tag_count = 3;
    int vocab_size = 8000;
    int co_threshold = 4;
    int n_cold = 1000;
    double valid_ratio = 0.2;
    double test_ratio = 0.2;
    std::uint64_t seed = 1;
};

struct PreparedData {
    Dataset dataset;
    IdMap items;
    IdMap tags;
    int skipped_edge_endpoints = 0;  // external ids never seen in interactions
    std::vector<int> isolated_items;
};

// Full ingestion pipeline: densify interactions, build tf-idf content, merge
// the social graph, draw the cold/train/valid/test split.
PreparedData prepare_dataset(const RawDataset& raw, const PrepareOptions& opts);

RawDataset load_raw_dataset(const std::string& dir);
void save_raw_dataset(const std::string& dir, const RawDataset& raw);

// Block-structured synthetic corpus: items fall into clusters that share a
// tag pool, a vocabulary block, and most of their social links. The real
// corpora require external downloads; this stands in for them.
struct SynthOptions {
    int n_items = 500;
    int n_tags = 80;
    int n_clusters = 8;
    int terms_per_cluster = 12;
    int shared_terms = 16;
    int doc_length = 30;
    int min_tags_per_item = 5;
    int max_tags_per_item = 9;
    double tag_noise = 0.30;        // chance a tag is drawn from the global pool
    double doc_cluster_purity = 0.85;
    int intrinsic_links_per_item = 2;
    double edge_noise = 0.10;       // chance an intrinsic link leaves the cluster
    int n_users = 200;
    int items_per_user = 8;
    double user_cluster_purity = 0.9;
    std::uint64_t seed = 1;
};

RawDataset generate_synthetic(const SynthOptions& opts);

// Cluster of each synthetic item (ground truth for tests).
std::vector<int> synthetic_clusters(const SynthOptions& opts);

}  // namespace macvae
