#include "gwkg/kgraph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "gwkg/io_util.hpp"
#include "gwkg/parallel.hpp"
#include "gwkg/rng.hpp"

namespace gwkg::graph {

using data::Entity;
using data::EntityKind;
using nlohmann::json;

const char* edge_kind_name(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::Lash: return "lash";
        case EdgeKind::Geometric: return "geometric";
        case EdgeKind::Category: return "category";
    }
    return "?";
}

std::optional<EdgeKind> edge_kind_from_name(const std::string& name) {
    if (name == "lash") return EdgeKind::Lash;
    if (name == "geometric") return EdgeKind::Geometric;
    if (name == "category") return EdgeKind::Category;
    return std::nullopt;
}

Matrix NormAdjacency::multiply(const Matrix& m) const {
    Matrix out(n, m.cols());
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* oi = out.row(i);
            for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
                kernels::axpy(val[e], m.row(col[e]), oi, m.cols());
            }
        }
    }, 128);
    return out;
}

std::vector<double> NormAdjacency::multiply(const std::vector<double>& x) const {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
            out[i] += val[e] * x[col[e]];
        }
    }
    return out;
}

Matrix NormAdjacency::dense() const {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) out(i, col[e]) = val[e];
    }
    return out;
}

namespace {

void add_edge(std::set<Edge>& edges, std::size_t a, std::size_t b, EdgeKind kind) {
    if (a == b) throw Error("self-edge on node index " + std::to_string(a));
    const auto u = static_cast<std::uint32_t>(std::min(a, b));
    const auto v = static_cast<std::uint32_t>(std::max(a, b));
    edges.insert(Edge{u, v, kind});
}

// Same-label pairing with a per-node cap; partner choice is a function of
// the sorted id order and the seed only.
void add_category_edges(std::set<Edge>& edges, const ShapeGraph& g, EntityKind kind,
                        int cap, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].kind == kind && !g.nodes[i].label.empty()) {
            groups[g.nodes[i].label].push_back(i);
        }
    }
    for (auto& [label, members] : groups) {
        std::sort(members.begin(), members.end(),
                  [&](std::size_t a, std::size_t b) { return g.nodes[a].id < g.nodes[b].id; });
        if (members.size() < 2) continue;
        for (std::size_t mi = 0; mi < members.size(); ++mi) {
            std::vector<std::size_t> others;
            others.reserve(members.size() - 1);
            for (std::size_t mj = 0; mj < members.size(); ++mj) {
                if (mj != mi) others.push_back(members[mj]);
            }
            if (cap <= 0 || others.size() <= static_cast<std::size_t>(cap)) {
                for (std::size_t o : others) add_edge(edges, members[mi], o, EdgeKind::Category);
            } else {
                // Keyed by the node id, not its position, so the sampled
                // partners survive manifest reordering.
                const std::string& id = g.nodes[members[mi]].id;
                Rng rng(derive_seed(seed, /*tag=*/0x63617445, fnv1a64(id.data(), id.size())));
                for (std::size_t pick : rng.sample_without_replacement(others.size(),
                                                                       static_cast<std::size_t>(cap))) {
                    add_edge(edges, members[mi], others[pick], EdgeKind::Category);
                }
            }
        }
    }
}

const vocab::PcaProjection& projection_for(const vocab::ProjectionSet& projections,
                                           EntityKind kind) {
    auto it = projections.find(kind);
    if (it == projections.end()) {
        throw Error(std::string("no projection for entity kind '") + data::kind_name(kind) + "'");
    }
    return it->second;
}

// Features and geometric edges for nodes [first, nodes.size()).
void project_and_link(ShapeGraph& g, const std::vector<Entity>& raw, std::size_t first,
                      const vocab::Vocabulary& vocabulary,
                      const vocab::ProjectionSet& projections, std::set<Edge>& edges) {
    const std::size_t dim = vocabulary.dim();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const Entity& e = raw[i];
        const auto& proj = projection_for(projections, e.kind);
        data::Descriptor feat = vocab::apply_pca(proj, e.descriptor);
        if (feat.size() != dim) {
            throw Error("entity '" + e.id + "': projected dim " + std::to_string(feat.size()) +
                        " does not match the common dim " + std::to_string(dim));
        }
        std::copy(feat.begin(), feat.end(), g.features.row(first + i));

        if (!e.parent.empty()) {
            auto parent = g.find(e.parent);
            if (!parent) throw Error("entity '" + e.id + "': parent '" + e.parent + "' not in graph");
            add_edge(edges, *parent, first + i, EdgeKind::Lash);
        }
        if (e.kind == EntityKind::Part) {
            const std::size_t word = vocab::assign_word(vocabulary, feat);
            add_edge(edges, g.word_node(word), first + i, EdgeKind::Geometric);
        }
    }
}

} // namespace

void ShapeGraph::rebuild() {
    index.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!index.emplace(nodes[i].id, i).second) {
            throw Error("duplicate node id '" + nodes[i].id + "'");
        }
    }
    neighbors.assign(nodes.size(), {});
    for (const Edge& e : edges) {
        neighbors[e.u].push_back(e.v);
        neighbors[e.v].push_back(e.u);
    }
    for (auto& list : neighbors) std::sort(list.begin(), list.end());
    norm_adj = normalized_adjacency(*this);
}

std::vector<std::size_t> ShapeGraph::model_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].kind == EntityKind::Model) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> ShapeGraph::views_of(std::size_t model) const {
    std::vector<std::size_t> out;
    for (std::uint32_t nb : neighbors[model]) {
        if (nodes[nb].kind == EntityKind::RenderedView && nodes[nb].parent == nodes[model].id) {
            out.push_back(nb);
        }
    }
    return out;
}

std::vector<std::size_t> ShapeGraph::parts_of(std::size_t node) const {
    std::vector<std::size_t> out;
    auto collect = [&](std::size_t holder) {
        for (std::uint32_t nb : neighbors[holder]) {
            if (nodes[nb].kind == EntityKind::Part && nodes[nb].parent == nodes[holder].id) {
                out.push_back(nb);
            }
        }
    };
    if (nodes[node].kind == EntityKind::Model) {
        for (std::size_t view : views_of(node)) collect(view);
    } else {
        collect(node);
    }
    return out;
}

std::vector<std::size_t> ShapeGraph::word_set_of(std::size_t node) const {
    std::set<std::size_t> words;
    for (std::size_t part : parts_of(node)) {
        for (std::uint32_t nb : neighbors[part]) {
            if (nodes[nb].kind == EntityKind::GeometricWord) words.insert(nb - word_base);
        }
    }
    return {words.begin(), words.end()};
}

ShapeGraph build_graph(const data::Corpus& corpus, const vocab::Vocabulary& vocabulary,
                       const vocab::ProjectionSet& projections, const BuildOptions& opts) {
    ShapeGraph g;
    const std::size_t dim = vocabulary.dim();
    g.word_base = corpus.size();
    g.word_count = vocabulary.k;
    g.features = Matrix(corpus.size() + vocabulary.k, dim);

    g.nodes.reserve(corpus.size() + vocabulary.k);
    for (const Entity& e : corpus.entities) {
        Entity node = e;
        node.descriptor.clear();
        g.nodes.push_back(std::move(node));
    }
    for (std::size_t w = 0; w < vocabulary.k; ++w) {
        Entity node;
        node.id = "gw" + std::to_string(w);
        node.kind = EntityKind::GeometricWord;
        g.nodes.push_back(std::move(node));
        std::copy(vocabulary.centroids.row(w), vocabulary.centroids.row(w) + dim,
                  g.features.row(g.word_base + w));
    }
    g.index.clear();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (!g.index.emplace(g.nodes[i].id, i).second) {
            throw Error("node id '" + g.nodes[i].id + "' collides with a geometric-word id");
        }
    }

    std::set<Edge> edges;
    project_and_link(g, corpus.entities, 0, vocabulary, projections, edges);
    if (opts.supervised) {
        add_category_edges(edges, g, EntityKind::Model, opts.category_cap, opts.seed);
        add_category_edges(edges, g, EntityKind::RealImage, opts.category_cap, opts.seed);
    }
    g.edges.assign(edges.begin(), edges.end());
    g.rebuild();
    return g;
}

NormAdjacency normalized_adjacency(const ShapeGraph& graph) {
    const std::size_t n = graph.nodes.size();
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (const Edge& e : graph.edges) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(adj[i].begin(), adj[i].end());
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size() + 1));
    }

    NormAdjacency s;
    s.n = n;
    s.row_ptr.resize(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) s.row_ptr[i + 1] = s.row_ptr[i] + adj[i].size() + 1;
    s.col.resize(s.row_ptr[n]);
    s.val.resize(s.row_ptr[n]);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t e = s.row_ptr[i];
        bool placed_self = false;
        auto put = [&](std::uint32_t j) {
            s.col[e] = j;
            s.val[e] = inv_sqrt_deg[i] * inv_sqrt_deg[j];
            ++e;
        };
        for (std::uint32_t j : adj[i]) {
            if (!placed_self && j > i) {
                put(static_cast<std::uint32_t>(i));
                placed_self = true;
            }
            put(j);
        }
        if (!placed_self) put(static_cast<std::uint32_t>(i));
    }
    return s;
}

std::pair<ShapeGraph, std::vector<std::size_t>> attach_query(
    const ShapeGraph& graph, const std::vector<Entity>& query_entities,
    const vocab::Vocabulary& vocabulary, const vocab::ProjectionSet& projections) {
    // Validates ids, parent links, labels, descriptor dims within the subtree.
    data::Corpus subtree = data::make_corpus(query_entities);
    std::size_t roots = 0;
    for (const Entity& e : subtree.entities) {
        if (e.parent.empty()) {
            ++roots;
            if (e.kind != EntityKind::Model && e.kind != EntityKind::RealImage) {
                throw Error("query root '" + e.id + "' must be a shape or a real image");
            }
        }
        if (graph.find(e.id)) throw Error("query id '" + e.id + "' already exists in the graph");
    }
    if (roots != 1) throw Error("query must form a single model-or-image subtree");

    ShapeGraph out;
    out.nodes = graph.nodes;
    out.edges = graph.edges;
    out.word_base = graph.word_base;
    out.word_count = graph.word_count;
    out.index = graph.index;

    const std::size_t first = graph.nodes.size();
    out.features = Matrix(first + query_entities.size(), graph.features.cols());
    std::copy(graph.features.data(), graph.features.data() + first * graph.features.cols(),
              out.features.data());

    std::vector<std::size_t> new_ids;
    for (const Entity& e : query_entities) {
        Entity node = e;
        node.descriptor.clear();
        out.index.emplace(node.id, out.nodes.size());
        new_ids.push_back(out.nodes.size());
        out.nodes.push_back(std::move(node));
    }

    std::set<Edge> edges(out.edges.begin(), out.edges.end());
    project_and_link(out, query_entities, first, vocabulary, projections, edges);
    out.edges.assign(edges.begin(), edges.end());
    out.rebuild();
    return {std::move(out), std::move(new_ids)};
}

void save_graph(const ShapeGraph& graph, const std::filesystem::path& json_path,
                const std::string& vocab_ref) {
    json obj;
    json nodes = json::array();
    for (const Entity& e : graph.nodes) {
        json n;
        n["id"] = e.id;
        n["kind"] = data::kind_name(e.kind);
        if (!e.label.empty()) n["label"] = e.label;
        if (!e.parent.empty()) n["parent"] = e.parent;
        nodes.push_back(std::move(n));
    }
    obj["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const Edge& e : graph.edges) {
        edges.push_back(json::array({e.u, e.v, edge_kind_name(e.kind)}));
    }
    obj["edges"] = std::move(edges);
    obj["dim"] = graph.features.cols();
    obj["word_base"] = graph.word_base;
    obj["word_count"] = graph.word_count;
    obj["vocab_ref"] = vocab_ref;

    auto features_path = json_path;
    features_path.replace_extension(".gwkg");
    obj["features_file"] = features_path.filename().string();

    std::vector<data::Descriptor> rows;
    rows.reserve(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        rows.emplace_back(graph.features.row(i), graph.features.row(i) + graph.features.cols());
    }
    data::write_sidecar(features_path, rows);
    atomic_write_file(json_path, obj.dump(2));
}

ShapeGraph load_graph(const std::filesystem::path& json_path) {
    json obj;
    try {
        obj = json::parse(read_file(json_path));
    } catch (const json::exception& ex) {
        throw Error("graph '" + json_path.string() + "': " + ex.what());
    }
    ShapeGraph g;
    for (const auto& n : obj.at("nodes")) {
        Entity e;
        e.id = n.at("id").get<std::string>();
        auto kind = data::kind_from_name(n.at("kind").get<std::string>());
        if (!kind) throw Error("graph node '" + e.id + "': unknown kind");
        e.kind = *kind;
        if (n.contains("label")) e.label = n.at("label").get<std::string>();
        if (n.contains("parent")) e.parent = n.at("parent").get<std::string>();
        g.nodes.push_back(std::move(e));
    }
    for (const auto& row : obj.at("edges")) {
        Edge e;
        e.u = row.at(0).get<std::uint32_t>();
        e.v = row.at(1).get<std::uint32_t>();
        auto kind = edge_kind_from_name(row.at(2).get<std::string>());
        if (!kind) throw Error("graph edge with unknown kind");
        e.kind = *kind;
        if (e.u >= e.v || e.v >= g.nodes.size()) throw Error("graph edge endpoints out of order");
        g.edges.push_back(e);
    }
    g.word_base = obj.at("word_base").get<std::size_t>();
    g.word_count = obj.at("word_count").get<std::size_t>();

    auto features_path = json_path;
    features_path.replace_extension(".gwkg");
    if (obj.contains("features_file")) {
        features_path = json_path.parent_path() / obj.at("features_file").get<std::string>();
    }
    const data::Sidecar sc = data::read_sidecar(features_path);
    if (sc.count != g.nodes.size() || sc.dim != obj.at("dim").get<std::size_t>()) {
        throw Error("graph features sidecar does not match node count/dim");
    }
    g.features = Matrix(sc.count, sc.dim);
    for (std::size_t i = 0; i < sc.count; ++i) {
        for (std::size_t j = 0; j < sc.dim; ++j) g.features(i, j) = sc.row(i)[j];
    }
    g.rebuild();
    return g;
}

} // namespace gwkg::graph
