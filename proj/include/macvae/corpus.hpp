#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "macvae/numerics.hpp"
#include "macvae/rng.hpp"

namespace macvae {

// Sparse binary item x tag matrix (implicit feedback).
struct InteractionMatrix {
    int n_items = 0;
    int n_tags = 0;
    std::vector<std::vector<int>> rows;  // per item, sorted tag ids, no dups

    int row_total(int item) const { return static_cast<int>(rows[static_cast<std::size_t>(item)].size()); }
    Vec dense_row(int item) const;
};

// Sparse TF-IDF rows over a fixed vocabulary.
struct ContentFeatures {
    int n_items = 0;
    std::vector<std::string> vocab;
    std::vector<std::vector<std::pair<int, double>>> rows;  // (term id, weight)

    Vec dense_row(int item) const;
};

enum EdgeOrigin : std::uint8_t { kIntrinsic = 1, kExtrinsic = 2 };

// Undirected {0,1}-weighted item graph; each edge remembers whether it came
// from intrinsic links, co-consumption, or both.
struct SocialGraph {
    int n_items = 0;
    std::vector<std::vector<std::pair<int, std::uint8_t>>> adjacency;  // sorted by neighbor id

    void add_edge(int a, int b, std::uint8_t origin);
    std::vector<int> neighbors(int item, bool intrinsic_only) const;
    bool has_edge(int a, int b) const;
    std::size_t edge_count() const;
    std::vector<int> isolated_items() const;
};

struct DatasetSplit {
    std::vector<int> cold_items;                 // no tags in train
    std::vector<std::vector<int>> train;         // per item (empty for cold)
    std::vector<std::vector<int>> valid;
    std::vector<std::vector<int>> test;

    bool is_cold(int item) const;
    std::vector<int> existing_items() const;     // items with nonempty train rows
};

// External-to-dense id maps emitted as sidecars.
struct IdMap {
    std::vector<std::string> names;              // dense id -> external id
    std::map<std::string, int> index;            // external id -> dense id

    int intern(const std::string& name);
};

struct InteractionLoadResult {
    InteractionMatrix matrix;
    IdMap items;
    IdMap tags;
};

// `item<TAB>tag` per line; tags used fewer than min_tag_count times are
// dropped, then ids are densified.
InteractionLoadResult load_interactions(const std::string& path, int min_tag_count = 3);
InteractionLoadResult build_interactions(const std::vector<std::pair<std::string, std::string>>& pairs,
                                         int min_tag_count);

// Documents as already-normalized token lists, aligned to the dense item
// universe (items without a document get an empty row). Vocabulary is the top
// vocab_size terms by document frequency (ties broken lexicographically);
// tf-idf = tf * max(0, ln(N / (1 + df))), rows L2-normalized.
ContentFeatures build_content_features(const std::vector<std::vector<std::string>>& documents,
                                       int vocab_size);

// Extrinsic edges connect items with >= co_threshold common users; the union
// with (symmetrized) intrinsic edges forms the graph.
SocialGraph build_social_graph(int n_items, const std::vector<std::pair<int, int>>& intrinsic_edges,
                               const std::vector<std::pair<std::string, int>>& user_item_log,
                               int co_threshold);

// Uniform cold holdout of n_cold items; remaining items' tags split per item
// with floor(valid), floor(test), remainder to train. Valid/test tags absent
// from the global train-tag set get reassigned to train.
DatasetSplit split_dataset(const InteractionMatrix& inter, int n_cold, double valid_ratio,
                           double test_ratio, std::uint64_t seed);

// ---- prepared-directory IO ------------------------------------------------

struct Dataset {
    InteractionMatrix interactions;
    ContentFeatures content;
    SocialGraph graph;
    DatasetSplit split;

    InteractionMatrix train_interactions() const;  // train tags only, cold rows empty
    void validate() const;                         // cross-checks item universes
};

void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

void save_id_map(const std::string& path, const IdMap& map);

// ---- raw-file ingestion helpers -------------------------------------------

std::vector<std::pair<std::string, std::vector<std::string>>> load_documents(
    const std::string& path);
std::vector<std::pair<std::string, std::string>> load_pair_file(const std::string& path);

}  // namespace macvae
