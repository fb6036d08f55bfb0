#pragma once
// Entity/corpus value types and manifest ingestion.
//
// On-disk formats:
//  - Manifest: UTF-8, one JSON object per line. Fields: kind ("shape" |
//    "view" | "real_image" | "part"), id, optional label, optional parent,
//    and exactly one of "descriptor" (array of numbers) or "blob" (row index
//    into the sidecar).
//  - Sidecar: magic "GWKG", u32-LE count, u32-LE dim, then count*dim IEEE-754
//    f32-LE values, row-major. Default sidecar path is the manifest path with
//    its extension replaced by ".gwkg".

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gwkg::data {

enum class EntityKind { Model, RenderedView, RealImage, Part, GeometricWord };

const char* kind_name(EntityKind kind);
std::optional<EntityKind> kind_from_name(const std::string& name);

using Descriptor = std::vector<double>;

struct Entity {
    std::string id;
    EntityKind kind = EntityKind::Model;
    std::string label;   // empty means absent; models and real images only
    std::string parent;  // empty means absent; views and parts only
    Descriptor descriptor;
};

// Immutable after load; safe for concurrent reads.
struct Corpus {
    std::vector<Entity> entities;  // manifest file order
    std::unordered_map<std::string, std::size_t> index;
    std::map<EntityKind, std::size_t> kind_dims;

    const Entity* find(const std::string& id) const {
        auto it = index.find(id);
        return it == index.end() ? nullptr : &entities[it->second];
    }
    std::size_t size() const { return entities.size(); }
};

struct Sidecar {
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
    std::vector<float> values;  // row-major

    const float* row(std::size_t i) const { return values.data() + i * dim; }
};

Sidecar read_sidecar(const std::filesystem::path& path);
void write_sidecar(const std::filesystem::path& path, const std::vector<Descriptor>& rows);
std::string sidecar_bytes(const std::vector<Descriptor>& rows);

std::filesystem::path default_sidecar_path(const std::filesystem::path& manifest_path);

// Parses and validates a manifest (plus its sidecar when any line uses a
// blob reference). Throws gwkg::Error with a line number or offending id on
// any malformed input; never returns a partial corpus.
Corpus load_manifest(const std::filesystem::path& manifest_path,
                     std::optional<std::filesystem::path> sidecar_path = std::nullopt);

enum class DescriptorStorage { Inline, Sidecar };

// Inline storage round-trips arbitrary doubles bit-exactly; sidecar storage
// stores f32 rows and is exact only for values already representable in f32.
void save_manifest(const Corpus& corpus, const std::filesystem::path& manifest_path,
                   DescriptorStorage storage = DescriptorStorage::Inline,
                   std::optional<std::filesystem::path> sidecar_path = std::nullopt);

// Validates an already-assembled entity list (same rules as load_manifest).
Corpus make_corpus(std::vector<Entity> entities);

struct CorpusStats {
    std::map<EntityKind, std::size_t> kind_counts;
    std::map<std::string, std::size_t> label_counts;  // sorted by label
    std::map<EntityKind, std::size_t> kind_dims;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string stats_to_json(const CorpusStats& stats);

} // namespace gwkg::data
