#include "macvae/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "macvae/errors.hpp"

namespace macvae {

Vec InteractionMatrix::dense_row(int item) const {
    Vec out(static_cast<std::size_t>(n_tags), 0.0);
    for (int t : rows[static_cast<std::size_t>(item)]) out[static_cast<std::size_t>(t)] = 1.0;
    return out;
}

Vec ContentFeatures::dense_row(int item) const {
    Vec out(vocab.size(), 0.0);
    for (const auto& [idx, w] : rows[static_cast<std::size_t>(item)])
        out[static_cast<std::size_t>(idx)] = w;
    return out;
}

void SocialGraph::add_edge(int a, int b, std::uint8_t origin) {
    if (a == b) return;
    if (a < 0 || b < 0 || a >= n_items || b >= n_items)
        throw DataError("social graph: item id out of range");
    auto ins = [&](int u, int v) {
        auto& adj = adjacency[static_cast<std::size_t>(u)];
        auto it = std::lower_bound(adj.begin(), adj.end(), std::make_pair(v, std::uint8_t{0}),
                                   [](const auto& x, const auto& y) { return x.first < y.first; });
        if (it != adj.end() && it->first == v)
            it->second |= origin;
        else
            adj.insert(it, {v, origin});
    };
    ins(a, b);
    ins(b, a);
}

std::vector<int> SocialGraph::neighbors(int item, bool intrinsic_only) const {
    std::vector<int> out;
    for (const auto& [n, origin] : adjacency[static_cast<std::size_t>(item)])
        if (!intrinsic_only || (origin & kIntrinsic)) out.push_back(n);
    return out;
}

bool SocialGraph::has_edge(int a, int b) const {
    const auto& adj = adjacency[static_cast<std::size_t>(a)];
    auto it = std::lower_bound(adj.begin(), adj.end(), std::make_pair(b, std::uint8_t{0}),
                               [](const auto& x, const auto& y) { return x.first < y.first; });
    return it != adj.end() && it->first == b;
}

std::size_t SocialGraph::edge_count() const {
    std::size_t total = 0;
    for (const auto& adj : adjacency) total += adj.size();
    return total / 2;
}

std::vector<int> SocialGraph::isolated_items() const {
    std::vector<int> out;
    for (int i = 0; i < n_items; ++i)
        if (adjacency[static_cast<std::size_t>(i)].empty()) out.push_back(i);
    return out;
}

bool DatasetSplit::is_cold(int item) const {
    return std::binary_search(cold_items.begin(), cold_items.end(), item);
}

std::vector<int> DatasetSplit::existing_items() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (!train[i].empty()) out.push_back(static_cast<int>(i));
    return out;
}

int IdMap::intern(const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(names.size());
    names.push_back(name);
    index[name] = id;
    return id;
}

InteractionLoadResult load_interactions(const std::string& path, int min_tag_count) {
    std::ifstream in(path);
    if (!in) throw DataError("load_interactions: cannot open " + path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw DataError("load_interactions: malformed line " + std::to_string(lineno) + " in " +
                            path);
        pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return build_interactions(pairs, min_tag_count);
}

InteractionLoadResult build_interactions(
    const std::vector<std::pair<std::string, std::string>>& pairs, int min_tag_count) {
    std::unordered_map<std::string, int> tag_count;
    for (const auto& [item, tag] : pairs) ++tag_count[tag];
    InteractionLoadResult res;
    for (const auto& [item, tag] : pairs) {
        if (tag_count[tag] < min_tag_count) {
            // item still enters the universe, possibly with an empty row
            res.items.intern(item);
            continue;
        }
        int i = res.items.intern(item);
        int t = res.tags.intern(tag);
        res.matrix.rows.resize(std::max<std::size_t>(res.matrix.rows.size(),
                                                     static_cast<std::size_t>(i) + 1));
        res.matrix.rows[static_cast<std::size_t>(i)].push_back(t);
    }
    res.matrix.n_items = static_cast<int>(res.items.names.size());
    res.matrix.n_tags = static_cast<int>(res.tags.names.size());
    res.matrix.rows.resize(static_cast<std::size_t>(res.matrix.n_items));
    for (auto& row : res.matrix.rows) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    if (res.matrix.n_items == 0 || res.matrix.n_tags == 0)
        throw DataError("load_interactions: empty dataset after filtering");
    return res;
}

ContentFeatures build_content_features(const std::vector<std::vector<std::string>>& documents,
                                       int vocab_size) {
    std::map<std::string, int> df;  // ordered for deterministic ties
    for (const auto& doc : documents) {
        std::set<std::string> seen(doc.begin(), doc.end());
        for (const auto& t : seen) ++df[t];
    }
    if (df.empty()) throw ConfigError("build_content_features: empty vocabulary");
    std::vector<std::pair<std::string, int>> terms(df.begin(), df.end());
    std::stable_sort(terms.begin(), terms.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (static_cast<int>(terms.size()) > vocab_size) terms.resize(static_cast<std::size_t>(vocab_size));

    ContentFeatures feats;
    feats.n_items = static_cast<int>(documents.size());
    std::unordered_map<std::string, int> term_id;
    for (const auto& [term, count] : terms) {
        term_id[term] = static_cast<int>(feats.vocab.size());
        feats.vocab.push_back(term);
    }
    double n_docs = static_cast<double>(documents.size());
    Vec idf(feats.vocab.size());
    for (std::size_t i = 0; i < feats.vocab.size(); ++i)
        idf[i] = std::max(0.0, std::log(n_docs / (1.0 + df[feats.vocab[i]])));

    feats.rows.resize(documents.size());
    for (std::size_t d = 0; d < documents.size(); ++d) {
        std::map<int, int> tf;
        for (const auto& tok : documents[d]) {
            auto it = term_id.find(tok);
            if (it != term_id.end()) ++tf[it->second];
        }
        double sq = 0.0;
        for (const auto& [tid, count] : tf) {
            double w = count * idf[static_cast<std::size_t>(tid)];
            if (w > 0.0) {
                feats.rows[d].emplace_back(tid, w);
                sq += w * w;
            }
        }
        if (sq > 0.0) {
            double inv = 1.0 / std::sqrt(sq);
            for (auto& [tid, w] : feats.rows[d]) w *= inv;
        }
    }
    return feats;
}

SocialGraph build_social_graph(int n_items, const std::vector<std::pair<int, int>>& intrinsic_edges,
                               const std::vector<std::pair<std::string, int>>& user_item_log,
                               int co_threshold) {
    SocialGraph g;
    g.n_items = n_items;
    g.adjacency.resize(static_cast<std::size_t>(n_items));
    for (const auto& [a, b] : intrinsic_edges) {
        if (a < 0 || b < 0 || a >= n_items || b >= n_items)
            throw DataError("build_social_graph: unknown item id in intrinsic edges");
        g.add_edge(a, b, kIntrinsic);
    }
    std::map<std::string, std::vector<int>> per_user;
    for (const auto& [user, item] : user_item_log) {
        if (item < 0 || item >= n_items)
            throw DataError("build_social_graph: unknown item id in user-item log");
        per_user[user].push_back(item);
    }
    std::map<std::pair<int, int>, int> co;
    for (auto& [user, items] : per_user) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        for (std::size_t i = 0; i < items.size(); ++i)
            for (std::size_t j = i + 1; j < items.size(); ++j) ++co[{items[i], items[j]}];
    }
    for (const auto& [pair, count] : co)
        if (count >= co_threshold) g.add_edge(pair.first, pair.second, kExtrinsic);
    return g;
}

DatasetSplit split_dataset(const InteractionMatrix& inter, int n_cold, double valid_ratio,
                           double test_ratio, std::uint64_t seed) {
    if (n_cold >= inter.n_items)
        throw ConfigError("split_dataset: n_cold must be smaller than the item count");
    Rng rng(seed);
    Rng cold_rng = rng.substream("split.cold");

    std::vector<int> order(static_cast<std::size_t>(inter.n_items));
    for (int i = 0; i < inter.n_items; ++i) order[static_cast<std::size_t>(i)] = i;
    cold_rng.shuffle(order);

    DatasetSplit split;
    split.cold_items.assign(order.begin(), order.begin() + n_cold);
    std::sort(split.cold_items.begin(), split.cold_items.end());
    split.train.resize(static_cast<std::size_t>(inter.n_items));
    split.valid.resize(static_cast<std::size_t>(inter.n_items));
    split.test.resize(static_cast<std::size_t>(inter.n_items));

    for (int item = 0; item < inter.n_items; ++item) {
        if (split.is_cold(item)) continue;
        std::vector<int> tags = inter.rows[static_cast<std::size_t>(item)];
        Rng item_rng = rng.substream("split.item", static_cast<std::uint64_t>(item));
        item_rng.shuffle(tags);
        int n = static_cast<int>(tags.size());
        int nv = static_cast<int>(std::floor(valid_ratio * n));
        int nt = static_cast<int>(std::floor(test_ratio * n));
        auto& tr = split.train[static_cast<std::size_t>(item)];
        auto& va = split.valid[static_cast<std::size_t>(item)];
        auto& te = split.test[static_cast<std::size_t>(item)];
        tr.assign(tags.begin(), tags.end() - nv - nt);
        va.assign(tags.end() - nv - nt, tags.end() - nt);
        te.assign(tags.end() - nt, tags.end());
    }

    // valid/test tags must be trainable: reassign any tag missing from the
    // global train set (moves only grow the set, one sweep suffices)
    std::vector<char> in_train(static_cast<std::size_t>(inter.n_tags), 0);
    for (const auto& row : split.train)
        for (int t : row) in_train[static_cast<std::size_t>(t)] = 1;
    for (int item = 0; item < inter.n_items; ++item) {
        for (auto* part : {&split.valid[static_cast<std::size_t>(item)],
                           &split.test[static_cast<std::size_t>(item)]}) {
            auto kept = part->begin();
            for (int t : *part) {
                if (in_train[static_cast<std::size_t>(t)]) {
                    *kept++ = t;
                } else {
                    split.train[static_cast<std::size_t>(item)].push_back(t);
                    in_train[static_cast<std::size_t>(t)] = 1;
                }
            }
            part->erase(kept, part->end());
        }
    }
    for (auto* parts : {&split.train, &split.valid, &split.test})
        for (auto& row : *parts) std::sort(row.begin(), row.end());
    return split;
}

InteractionMatrix Dataset::train_interactions() const {
    InteractionMatrix out;
    out.n_items = interactions.n_items;
    out.n_tags = interactions.n_tags;
    out.rows = split.train;
    return out;
}

void Dataset::validate() const {
    if (content.n_items != interactions.n_items || graph.n_items != interactions.n_items)
        throw DataError("dataset: item universes disagree across interactions/content/graph");
    for (const auto& row : interactions.rows)
        for (int t : row)
            if (t < 0 || t >= interactions.n_tags)
                throw DataError("dataset: tag id out of range");
}

// ---- text IO --------------------------------------------------------------

namespace {

void write_int_list(std::ofstream& out, const std::vector<int>& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? " " : "") << xs[i];
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream iss(s);
    int x;
    while (iss >> x) out.push_back(x);
    return out;
}

}  // namespace

void save_id_map(const std::string& path, const IdMap& map) {
    std::ofstream out(path);
    if (!out) throw DataError("save_id_map: cannot open " + path);
    for (std::size_t i = 0; i < map.names.size(); ++i) out << map.names[i] << '\t' << i << '\n';
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    {
        std::ofstream out(dir + "/interactions.tsv");
        if (!out) throw DataError("save_dataset: cannot write to " + dir);
        for (int i = 0; i < ds.interactions.n_items; ++i)
            for (int t : ds.interactions.rows[static_cast<std::size_t>(i)])
                out << i << '\t' << t << '\n';
    }
    {
        std::ofstream out(dir + "/vocab.txt");
        for (const auto& term : ds.content.vocab) out << term << '\n';
    }
    {
        std::ofstream out(dir + "/features.tsv");
        out.precision(17);
        for (int i = 0; i < ds.content.n_items; ++i) {
            out << i;
            for (const auto& [tid, w] : ds.content.rows[static_cast<std::size_t>(i)])
                out << '\t' << tid << ':' << w;
            out << '\n';
        }
    }
    {
        std::ofstream out(dir + "/graph.tsv");
        for (int i = 0; i < ds.graph.n_items; ++i)
            for (const auto& [n, origin] : ds.graph.adjacency[static_cast<std::size_t>(i)])
                if (i < n) out << i << '\t' << n << '\t' << int(origin) << '\n';
    }
    {
        std::ofstream out(dir + "/split.txt");
        out << "macvae-split v1\n";
        out << "n_items " << ds.interactions.n_items << '\n';
        out << "n_tags " << ds.interactions.n_tags << '\n';
        out << "cold ";
        write_int_list(out, ds.split.cold_items);
        out << '\n';
        for (int i = 0; i < ds.interactions.n_items; ++i) {
            if (ds.split.is_cold(i)) continue;
            out << "item " << i << '\n';
            out << "train ";
            write_int_list(out, ds.split.train[static_cast<std::size_t>(i)]);
            out << '\n';
            out << "valid ";
            write_int_list(out, ds.split.valid[static_cast<std::size_t>(i)]);
            out << '\n';
            out << "test ";
            write_int_list(out, ds.split.test[static_cast<std::size_t>(i)]);
            out << '\n';
        }
    }
}

Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    // split first: it carries the universe sizes
    {
        std::ifstream in(dir + "/split.txt");
        if (!in) throw DataError("load_dataset: cannot open " + dir + "/split.txt");
        std::string line;
        std::getline(in, line);
        if (line != "macvae-split v1") throw DataError("load_dataset: bad split header");
        int n_items = 0, n_tags = 0;
        int cur_item = -1;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto sp = line.find(' ');
            std::string key = line.substr(0, sp);
            std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
            if (key == "n_items") {
                n_items = std::stoi(rest);
                ds.split.train.resize(static_cast<std::size_t>(n_items));
                ds.split.valid.resize(static_cast<std::size_t>(n_items));
                ds.split.test.resize(static_cast<std::size_t>(n_items));
            } else if (key == "n_tags") {
                n_tags = std::stoi(rest);
            } else if (key == "cold") {
                ds.split.cold_items = parse_int_list(rest);
            } else if (key == "item") {
                cur_item = std::stoi(rest);
            } else if (key == "train") {
                ds.split.train.at(static_cast<std::size_t>(cur_item)) = parse_int_list(rest);
            } else if (key == "valid") {
                ds.split.valid.at(static_cast<std::size_t>(cur_item)) = parse_int_list(rest);
            } else if (key == "test") {
                ds.split.test.at(static_cast<std::size_t>(cur_item)) = parse_int_list(rest);
            } else {
                throw DataError("load_dataset: unknown split key " + key);
            }
        }
        ds.interactions.n_items = n_items;
        ds.interactions.n_tags = n_tags;
    }
    {
        ds.interactions.rows.resize(static_cast<std::size_t>(ds.interactions.n_items));
        std::ifstream in(dir + "/interactions.tsv");
        if (!in) throw DataError("load_dataset: cannot open " + dir + "/interactions.tsv");
        int item, tag;
        while (in >> item >> tag) ds.interactions.rows.at(static_cast<std::size_t>(item)).push_back(tag);
        for (auto& row : ds.interactions.rows) std::sort(row.begin(), row.end());
    }
    {
        std::ifstream in(dir + "/vocab.txt");
        if (!in) throw DataError("load_dataset: cannot open " + dir + "/vocab.txt");
        std::string term;
        while (std::getline(in, term))
            if (!term.empty()) ds.content.vocab.push_back(term);
    }
    {
        ds.content.n_items = ds.interactions.n_items;
        ds.content.rows.resize(static_cast<std::size_t>(ds.content.n_items));
        std::ifstream in(dir + "/features.tsv");
        if (!in) throw DataError("load_dataset: cannot open " + dir + "/features.tsv");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream iss(line);
            int item;
            iss >> item;
            std::string tok;
            while (iss >> tok) {
                auto colon = tok.find(':');
                int tid = std::stoi(tok.substr(0, colon));
                double w = std::stod(tok.substr(colon + 1));
                ds.content.rows.at(static_cast<std::size_t>(item)).emplace_back(tid, w);
            }
        }
    }
    {
        ds.graph.n_items = ds.interactions.n_items;
        ds.graph.adjacency.resize(static_cast<std::size_t>(ds.graph.n_items));
        std::ifstream in(dir + "/graph.tsv");
        if (!in) throw DataError("load_dataset: cannot open " + dir + "/graph.tsv");
        int a, b, origin;
        while (in >> a >> b >> origin)
            ds.graph.add_edge(a, b, static_cast<std::uint8_t>(origin));
    }
    ds.validate();
    return ds;
}

std::vector<std::pair<std::string, std::vector<std::string>>> load_documents(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_documents: cannot open " + path);
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("load_documents: malformed line in " + path);
        std::vector<std::string> tokens;
        std::istringstream iss(line.substr(tab + 1));
        std::string tok;
        while (iss >> tok) tokens.push_back(tok);
        out.emplace_back(line.substr(0, tab), std::move(tokens));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> load_pair_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_pair_file: cannot open " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("load_pair_file: malformed line " + std::to_string(lineno) + " in " +
                            path);
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

}  // namespace macvae
