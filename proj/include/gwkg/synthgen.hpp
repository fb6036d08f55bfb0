#pragma once
// Synthetic corpora with known ground truth: latent word prototypes compose
// into classes; shapes, views and cross-modal "real image" queries are noisy
// draws of the same class composition, so the whole pipeline can be verified
// at desk scale.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gwkg/datamodel.hpp"
#include "gwkg/matrix.hpp"

namespace gwkg::synth {

struct SynthConfig {
    std::size_t classes = 10;
    std::size_t shapes_per_class = 20;
    std::size_t true_words = 30;
    // With the defaults 10 classes x 4 words force some cross-class word
    // sharing (40 draws over 30 words), which exercises the word channel.
    std::size_t words_per_class = 4;
    std::size_t views_per_shape = 3;
    std::size_t parts_per_view = 3;
    std::size_t images_per_class = 5;  // cross-modal query images
    std::size_t dim = 16;
    double noise_sigma = 0.1;
    double prototype_separation = 4.0;
    // Partition words across classes instead of drawing random subsets;
    // zero cross-class word overlap by construction.
    bool disjoint_words = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthWorld {
    data::Corpus corpus;
    std::map<std::string, std::string> truth;  // query id (model or image) -> class label
    Matrix prototypes;                         // true_words x dim
    std::vector<std::vector<std::size_t>> class_words;
};

// Deterministic for a given config; every descriptor is rounded through f32
// so the sidecar round-trips bit-exactly.
SynthWorld generate(const SynthConfig& config);

// Emits world.jsonl + world.gwkg (manifest + sidecar) and truth.json.
void write_world(const SynthWorld& world, const std::filesystem::path& out_dir);

std::map<std::string, std::string> load_truth(const std::filesystem::path& path);

} // namespace gwkg::synth
