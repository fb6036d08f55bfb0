#pragma once
// Entity embedding: a GCN whose layers propagate through the normalized
// adjacency, trained with a link-prediction objective by full-batch gradient
// descent (W <- W - b dL/dW). Hidden layers use ReLU; the output layer is
// linear so pair logits can go negative.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gwkg/kgraph.hpp"
#include "gwkg/matrix.hpp"

namespace gwkg::embed {

struct GcnConfig {
    std::vector<std::size_t> layer_dims;  // input D, hidden..., embedding E
    double learning_rate = 0.01;
    std::size_t epochs = 300;
    std::size_t neg_ratio = 5;
    std::uint64_t seed = 0;
    std::optional<double> tol;      // optional early stop on |loss delta|
    bool freeze_negatives = false;  // default resamples negatives per epoch
};

// Per-column standardization fitted on the training graph's features and
// frozen into the model; raw descriptor scales vary by corpus and would
// otherwise saturate the pair logits.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> inv_std;  // 1.0 for constant columns

    Matrix apply(const Matrix& x) const;
};

FeatureScaler fit_scaler(const Matrix& x);

struct EmbeddingTable {
    Matrix embeddings;            // N x E
    std::vector<Matrix> weights;  // weights[l] is layer_dims[l] x layer_dims[l+1]
    FeatureScaler scaler;
    double final_loss = 0.0;
    std::vector<double> epoch_losses;
};

struct PairSample {
    std::uint32_t anchor = 0;
    std::vector<std::uint32_t> positives;  // 1-hop neighbors
    std::vector<std::uint32_t> negatives;  // sampled non-neighbors
};

// Glorot-range uniform initialization, deterministic from the seed.
std::vector<Matrix> init_weights(const GcnConfig& config);

// Propagates the graph's raw feature matrix (or an explicit replacement,
// e.g. scaled features) through the layers.
Matrix gcn_forward(const graph::ShapeGraph& graph, const std::vector<Matrix>& weights);
Matrix gcn_forward(const graph::ShapeGraph& graph, const std::vector<Matrix>& weights,
                   const Matrix& features);

// L = sum_i [ sum_{j in S_p} -log sigmoid(y_i.y_j)
//           + sum_{k in S_n} -log sigmoid(-y_i.y_k) ],
// evaluated with a stabilized log-sigmoid (finite for |dot| up to 1e4).
double pair_loss(const Matrix& y, const std::vector<PairSample>& samples);

// One sample per non-isolated node: positives are its direct neighbors,
// negatives are neg_ratio * |S_p| non-neighbors drawn without replacement.
std::vector<PairSample> sample_pairs(const graph::ShapeGraph& graph, std::size_t neg_ratio,
                                     std::uint64_t seed);

EmbeddingTable train(const graph::ShapeGraph& graph, const GcnConfig& config);

struct GradCheckResult {
    double max_rel_error = 0.0;
    // Smallest |pre-activation| across hidden layers; callers resample the
    // graph when this is near a ReLU kink.
    double min_preactivation = 0.0;
};

// Compares the analytic gradient against central finite differences over
// every weight entry. Intended for graphs of ~20 nodes or fewer.
GradCheckResult grad_check(const graph::ShapeGraph& graph, const GcnConfig& config,
                           double epsilon);

// Inductive forward pass with frozen weights over a graph extended by
// attach_query; returns embeddings for all nodes of the augmented graph.
// Base nodes farther than #layers + 1 hops from any query node keep their
// embeddings bit-exactly (attachment changes degrees of the query's
// neighbors, and the normalization couples each edge to both endpoint
// degrees, which pushes the perturbation front one hop past the layers).
Matrix embed_query(const graph::ShapeGraph& augmented_graph, const EmbeddingTable& table);

// Persists weights as JSON (<base>.json), embeddings in the binary sidecar
// (<base>.gwkg) and the training log as CSV (<base>.loss.csv).
void save_table(const EmbeddingTable& table, const std::filesystem::path& base_path);
EmbeddingTable load_table(const std::filesystem::path& base_path);

} // namespace gwkg::embed
