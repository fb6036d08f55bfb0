#pragma once
// The shape knowledge graph: one node per corpus entity plus one node per
// geometric word. Lash edges follow parent links, geometric edges connect
// each part to its assigned word, category edges pair same-label models (and
// same-label real images) when supervised mode is on.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gwkg/datamodel.hpp"
#include "gwkg/kmeans.hpp"
#include "gwkg/matrix.hpp"

namespace gwkg::graph {

enum class EdgeKind { Lash, Geometric, Category };

const char* edge_kind_name(EdgeKind kind);
std::optional<EdgeKind> edge_kind_from_name(const std::string& name);

struct Edge {
    std::uint32_t u = 0;  // u < v
    std::uint32_t v = 0;
    EdgeKind kind = EdgeKind::Lash;

    auto operator<=>(const Edge&) const = default;
};

// Symmetric normalized adjacency D^-1/2 (A + I) D^-1/2 in CSR form.
struct NormAdjacency {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    // out = S * m (row-parallel; deterministic).
    Matrix multiply(const Matrix& m) const;
    std::vector<double> multiply(const std::vector<double>& x) const;
    Matrix dense() const;
};

struct ShapeGraph {
    std::vector<data::Entity> nodes;  // descriptors live in `features`, not here
    std::unordered_map<std::string, std::size_t> index;
    std::vector<Edge> edges;  // sorted, unique, u < v
    Matrix features;          // N x D
    NormAdjacency norm_adj;
    std::size_t word_base = 0;   // node index of geometric word 0
    std::size_t word_count = 0;  // == vocabulary k

    // Kind-agnostic sorted neighbor lists (self-loops excluded).
    std::vector<std::vector<std::uint32_t>> neighbors;

    std::size_t size() const { return nodes.size(); }
    std::size_t degree(std::size_t i) const { return neighbors[i].size(); }
    std::size_t word_node(std::size_t word_index) const { return word_base + word_index; }

    // Recomputes index, neighbor lists and the normalized adjacency from
    // `nodes` and `edges`; callers that assemble a graph by hand must invoke
    // this before using it.
    void rebuild();

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end()) return std::nullopt;
        return it->second;
    }

    // Entity sets for the similarity channels.
    std::vector<std::size_t> model_nodes() const;
    std::vector<std::size_t> views_of(std::size_t model) const;
    std::vector<std::size_t> parts_of(std::size_t node) const;     // model or image
    std::vector<std::size_t> word_set_of(std::size_t node) const;  // distinct, sorted word indices
};

struct BuildOptions {
    bool supervised = true;
    // Max sampled same-label partners per node; <= 0 restores the full
    // same-label clique.
    int category_cap = 10;
    std::uint64_t seed = 0;
};

ShapeGraph build_graph(const data::Corpus& corpus, const vocab::Vocabulary& vocabulary,
                       const vocab::ProjectionSet& projections, const BuildOptions& opts = {});

// Recomputes D^-1/2 (A + I) D^-1/2 from the edge set.
NormAdjacency normalized_adjacency(const ShapeGraph& graph);

// Appends a query subtree (model with views/parts, or real image with parts)
// using the same lash/geometric rules; never adds category edges. The input
// graph is untouched; returns the extended copy and the new node indices.
std::pair<ShapeGraph, std::vector<std::size_t>> attach_query(
    const ShapeGraph& graph, const std::vector<data::Entity>& query_entities,
    const vocab::Vocabulary& vocabulary, const vocab::ProjectionSet& projections);

void save_graph(const ShapeGraph& graph, const std::filesystem::path& json_path,
                const std::string& vocab_ref);
ShapeGraph load_graph(const std::filesystem::path& json_path);

} // namespace gwkg::graph
