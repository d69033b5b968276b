#include "macvae/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "macvae/errors.hpp"

namespace macvae {

PreparedData prepare_dataset(const RawDataset& raw, const PrepareOptions& opts) {
    PreparedData out;
    auto loaded = build_interactions(raw.interactions, opts.min_tag_count);
    out.items = std::move(loaded.items);
    out.tags = std::move(loaded.tags);
    out.dataset.interactions = std::move(loaded.matrix);
    int n_items = out.dataset.interactions.n_items;

    std::vector<std::vector<std::string>> docs(static_cast<std::size_t>(n_items));
    for (const auto& [ext, tokens] : raw.documents) {
        auto it = out.items.index.find(ext);
        if (it == out.items.index.end()) continue;
        docs[static_cast<std::size_t>(it->second)] = tokens;
    }
    out.dataset.content = build_content_features(docs, opts.vocab_size);

    std::vector<std::pair<int, int>> intrinsic;
    for (const auto& [a, b] : raw.intrinsic_edges) {
        auto ia = out.items.index.find(a);
        auto ib = out.items.index.find(b);
        if (ia == out.items.index.end() || ib == out.items.index.end()) {
            ++out.skipped_edge_endpoints;
            continue;
        }
        intrinsic.emplace_back(ia->second, ib->second);
    }
    std::vector<std::pair<std::string, int>> log;
    for (const auto& [user, ext] : raw.user_item) {
        auto it = out.items.index.find(ext);
        if (it == out.items.index.end()) {
            ++out.skipped_edge_endpoints;
            continue;
        }
        log.emplace_back(user, it->second);
    }
    out.dataset.graph = build_social_graph(n_items, intrinsic, log, opts.co_threshold);
    out.isolated_items = out.dataset.graph.isolated_items();

    out.dataset.split = split_dataset(out.dataset.interactions, opts.n_cold, opts.valid_ratio,
                                      opts.test_ratio, opts.seed);
    out.dataset.validate();
    return out;
}

std::vector<int> synthetic_clusters(const SynthOptions& opts) {
    std::vector<int> clusters(static_cast<std::size_t>(opts.n_items));
    for (int i = 0; i < opts.n_items; ++i)
        clusters[static_cast<std::size_t>(i)] = i % opts.n_clusters;
    return clusters;
}

RawDataset generate_synthetic(const SynthOptions& opts) {
    if (opts.n_tags % opts.n_clusters != 0)
        throw ConfigError("generate_synthetic: n_tags must divide evenly into clusters");
    Rng rng(opts.seed);
    RawDataset raw;
    auto clusters = synthetic_clusters(opts);
    int tags_per_cluster = opts.n_tags / opts.n_clusters;

    auto item_name = [](int i) { return "i" + std::to_string(i); };
    auto tag_name = [](int t) { return "t" + std::to_string(t); };

    Rng tag_rng = rng.substream("synth.tags");
    for (int i = 0; i < opts.n_items; ++i) {
        int k = clusters[static_cast<std::size_t>(i)];
        int n = opts.min_tags_per_item +
                tag_rng.uniform_int(opts.max_tags_per_item - opts.min_tags_per_item + 1);
        std::set<int> tags;
        while (static_cast<int>(tags.size()) < n) {
            int t = tag_rng.uniform() < opts.tag_noise
                        ? tag_rng.uniform_int(opts.n_tags)
                        : k * tags_per_cluster + tag_rng.uniform_int(tags_per_cluster);
            tags.insert(t);
        }
        for (int t : tags) raw.interactions.emplace_back(item_name(i), tag_name(t));
    }

    Rng doc_rng = rng.substream("synth.docs");
    for (int i = 0; i < opts.n_items; ++i) {
        int k = clusters[static_cast<std::size_t>(i)];
        std::vector<std::string> tokens;
        tokens.reserve(static_cast<std::size_t>(opts.doc_length));
        for (int j = 0; j < opts.doc_length; ++j) {
            if (doc_rng.uniform() < opts.doc_cluster_purity)
                tokens.push_back("w" + std::to_string(k) + "_" +
                                 std::to_string(doc_rng.uniform_int(opts.terms_per_cluster)));
            else
                tokens.push_back("shared" + std::to_string(doc_rng.uniform_int(opts.shared_terms)));
        }
        raw.documents.emplace_back(item_name(i), std::move(tokens));
    }

    Rng edge_rng = rng.substream("synth.edges");
    for (int i = 0; i < opts.n_items; ++i) {
        int k = clusters[static_cast<std::size_t>(i)];
        for (int e = 0; e < opts.intrinsic_links_per_item; ++e) {
            int other;
            if (edge_rng.uniform() < opts.edge_noise) {
                other = edge_rng.uniform_int(opts.n_items);
            } else {
                // random member of the same cluster (round-robin layout)
                int cluster_size = (opts.n_items - k + opts.n_clusters - 1) / opts.n_clusters;
                other = k + opts.n_clusters * edge_rng.uniform_int(cluster_size);
            }
            if (other == i) other = (other + opts.n_clusters) % opts.n_items;
            raw.intrinsic_edges.emplace_back(item_name(i), item_name(other));
        }
    }

    Rng user_rng = rng.substream("synth.users");
    for (int u = 0; u < opts.n_users; ++u) {
        int k = u % opts.n_clusters;
        std::string user = "u" + std::to_string(u);
        for (int j = 0; j < opts.items_per_user; ++j) {
            int item;
            if (user_rng.uniform() < opts.user_cluster_purity) {
                int cluster_size = (opts.n_items - k + opts.n_clusters - 1) / opts.n_clusters;
                item = k + opts.n_clusters * user_rng.uniform_int(cluster_size);
            } else {
                item = user_rng.uniform_int(opts.n_items);
            }
            raw.user_item.emplace_back(user, item_name(item));
        }
    }
    return raw;
}

void save_raw_dataset(const std::string& dir, const RawDataset& raw) {
    auto open = [&](const std::string& name) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw DataError("save_raw_dataset: cannot write " + dir + "/" + name);
        return out;
    };
    {
        auto out = open("interactions.tsv");
        for (const auto& [i, t] : raw.interactions) out << i << '\t' << t << '\n';
    }
    {
        auto out = open("docs.txt");
        for (const auto& [i, tokens] : raw.documents) {
            out << i << '\t';
            for (std::size_t j = 0; j < tokens.size(); ++j) out << (j ? " " : "") << tokens[j];
            out << '\n';
        }
    }
    {
        auto out = open("edges_intrinsic.tsv");
        for (const auto& [a, b] : raw.intrinsic_edges) out << a << '\t' << b << '\n';
    }
    {
        auto out = open("user_item.tsv");
        for (const auto& [u, i] : raw.user_item) out << u << '\t' << i << '\n';
    }
}

RawDataset load_raw_dataset(const std::string& dir) {
    RawDataset raw;
    raw.interactions = load_pair_file(dir + "/interactions.tsv");
    raw.documents = load_documents(dir + "/docs.txt");
    raw.intrinsic_edges = load_pair_file(dir + "/edges_intrinsic.tsv");
    raw.user_item = load_pair_file(dir + "/user_item.tsv");
    return raw;
}

}  // namespace macvae
