#pragma once
// Geometric-word vocabulary: k-means over part descriptors. Each cluster
// center becomes the descriptor of one geometric-word entity.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gwkg/datamodel.hpp"
#include "gwkg/matrix.hpp"
#include "gwkg/pca.hpp"

namespace gwkg::vocab {

struct Vocabulary {
    std::size_t k = 0;
    Matrix centroids;  // k x dim
    double inertia = 0.0;
    std::uint64_t seed = 0;

    std::size_t dim() const { return centroids.cols(); }
};

struct KmeansOptions {
    std::uint64_t seed = 0;
    std::size_t max_iters = 100;
    double tol = 1e-4;
};

struct KmeansTrace {
    std::vector<double> inertia_per_iter;
    std::size_t reseeds = 0;  // empty-cluster recoveries
};

// Lloyd iterations from k-means++ seeding. Deterministic given the seed;
// stops when the max centroid shift drops below tol or after max_iters.
// Empty clusters are reseeded to the point farthest from its centroid.
Vocabulary kmeans_fit(const std::vector<Descriptor>& parts, std::size_t k,
                      const KmeansOptions& opts = {}, KmeansTrace* trace = nullptr);

// Index of the nearest centroid by Euclidean distance; ties break low.
std::size_t assign_word(const Vocabulary& vocab, const Descriptor& part);

namespace detail {
// One Lloyd mean update. Clusters that lost every member are reseeded to
// the point farthest from its assigned centroid (distances supplied by the
// preceding assignment step). Exposed so the reseed rule is testable.
Matrix update_means(const std::vector<Descriptor>& points,
                    const std::vector<std::size_t>& cluster_of,
                    const std::vector<double>& dist2_to_centroid, std::size_t k,
                    std::size_t* reseeds);
} // namespace detail

// Persistence: {k, dim, centroids, inertia, seed} plus the per-kind PCA
// projections the pipeline fitted alongside the vocabulary.
using ProjectionSet = std::map<data::EntityKind, PcaProjection>;

// One projection per entity kind present in the corpus, each targeting the
// common dim (target_dim == 0 picks min(128, smallest modality dim)). Kinds
// already at the target keep an identity projection.
ProjectionSet fit_projection_set(const data::Corpus& corpus, std::size_t target_dim = 0);

std::string vocab_to_json(const Vocabulary& vocab, const ProjectionSet& projections);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab,
                     const ProjectionSet& projections);
std::pair<Vocabulary, ProjectionSet> load_vocabulary(const std::filesystem::path& path);

} // namespace gwkg::vocab
