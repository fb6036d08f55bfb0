#pragma once
// Similarity channels and candidate ranking. A query shape is compared to a
// candidate on four channels (model cosine, best view pair, matched parts,
// shared geometric words); an image query uses the view/part/word triple.

#include <cstddef>
#include <string>
#include <vector>

#include "gwkg/gcn.hpp"
#include "gwkg/kgraph.hpp"
#include "gwkg/matrix.hpp"

namespace gwkg::sim {

using data::Descriptor;

struct ChannelWeights {
    // Shape query: model / view / part / word channel weights; sum to 1.
    double alpha = 0.25, beta = 0.25, gamma = 0.25, lambda = 0.25;
    // Image query triple; sums to 1.
    double beta_star = 1.0 / 3.0, gamma_star = 1.0 / 3.0, lambda_star = 1.0 / 3.0;

    void validate_shape() const;
    void validate_image() const;
};

// 0.5 * (1 + cos(a, b)); errors on a zero vector.
double sim_entity(const double* a, const double* b, std::size_t n);
double sim_entity(const Descriptor& a, const Descriptor& b);

// Max sim_entity over the cross pairs of two non-empty embedding sets.
double sim_views(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b);

// c distinct shared words -> c / (c + 1); zero overlap -> 0.
double sim_words(const std::vector<std::size_t>& a_words, const std::vector<std::size_t>& b_words);

// Maximum-weight bipartite matching (Hungarian) over an m x n weight
// matrix; returns the matched weight sum and, per row, the matched column
// (or npos when unmatched on rectangular inputs).
struct MatchingResult {
    double total = 0.0;
    std::vector<std::size_t> match_of_row;
};
MatchingResult max_weight_matching(const Matrix& weights);

// Matching sum over sim_entity weights, normalized by min(|a|, |b|).
double sim_parts(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b);

struct ChannelScores {
    double sm = 0.0, si = 0.0, sp = 0.0, sg = 0.0;
};

enum class QueryMode { Shape, Image, Parts };
const char* mode_name(QueryMode mode);

// Binds a graph and an embedding matrix and evaluates the combined scores.
// Channels whose entity set is empty on either side contribute 0, mirroring
// the zero-overlap word rule; a self comparison scores 1 on every channel.
class Scorer {
public:
    Scorer(const graph::ShapeGraph& graph, const Matrix& embeddings);

    double score_shape_query(std::size_t query_node, std::size_t candidate_node,
                             const ChannelWeights& w, ChannelScores* channels = nullptr) const;
    double score_image_query(std::size_t image_node, std::size_t candidate_node,
                             const ChannelWeights& w, ChannelScores* channels = nullptr) const;
    // Part/word channels only, weights renormalized over {gamma, lambda}.
    double score_parts_query(std::size_t query_node, std::size_t candidate_node,
                             const ChannelWeights& w, ChannelScores* channels = nullptr) const;

    const graph::ShapeGraph& shape_graph() const { return graph_; }

private:
    struct EntitySets {
        Descriptor self;
        std::vector<Descriptor> views;
        std::vector<Descriptor> parts;
        std::vector<std::size_t> words;
    };
    EntitySets sets_for(std::size_t node) const;

    const graph::ShapeGraph& graph_;
    const Matrix& emb_;
};

struct ScoredCandidate {
    std::string id;
    double score = 0.0;
    ChannelScores channels;
};

struct RetrievalResult {
    std::string query;
    QueryMode mode = QueryMode::Shape;
    ChannelWeights weights;
    std::vector<ScoredCandidate> results;  // descending score, ties by ascending id
};

// Scores every candidate model (the query itself is excluded in shape and
// parts mode). top_n == 0 keeps the full ranking.
RetrievalResult retrieve(const graph::ShapeGraph& graph, const Matrix& embeddings,
                         const std::string& query_id, QueryMode mode, const ChannelWeights& w,
                         std::size_t top_n);

std::string retrieval_to_json(const RetrievalResult& result);

} // namespace gwkg::sim
