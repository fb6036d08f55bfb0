#include "gwkg/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gwkg/io_util.hpp"

namespace gwkg::data {

using nlohmann::json;

const char* kind_name(EntityKind kind) {
    switch (kind) {
        case EntityKind::Model: return "shape";
        case EntityKind::RenderedView: return "view";
        case EntityKind::RealImage: return "real_image";
        case EntityKind::Part: return "part";
        case EntityKind::GeometricWord: return "geometric_word";
    }
    return "?";
}

std::optional<EntityKind> kind_from_name(const std::string& name) {
    if (name == "shape") return EntityKind::Model;
    if (name == "view") return EntityKind::RenderedView;
    if (name == "real_image") return EntityKind::RealImage;
    if (name == "part") return EntityKind::Part;
    if (name == "geometric_word") return EntityKind::GeometricWord;
    return std::nullopt;
}

namespace {

constexpr char kMagic[4] = {'G', 'W', 'K', 'G'};

void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

bool parent_allowed(EntityKind kind) {
    return kind == EntityKind::RenderedView || kind == EntityKind::Part;
}

bool label_allowed(EntityKind kind) {
    return kind == EntityKind::Model || kind == EntityKind::RealImage;
}

void validate_structure(const Corpus& corpus) {
    for (const Entity& e : corpus.entities) {
        if (e.kind == EntityKind::GeometricWord) {
            throw Error("entity '" + e.id + "': geometric words are vocabulary-derived, not corpus entities");
        }
        if (parent_allowed(e.kind) && e.parent.empty()) {
            throw Error("entity '" + e.id + "': kind '" + kind_name(e.kind) + "' requires a parent");
        }
        if (!parent_allowed(e.kind) && !e.parent.empty()) {
            throw Error("entity '" + e.id + "': kind '" + kind_name(e.kind) + "' must not have a parent");
        }
        if (!label_allowed(e.kind) && !e.label.empty()) {
            throw Error("entity '" + e.id + "': kind '" + kind_name(e.kind) + "' must not have a label");
        }
        if (!e.parent.empty()) {
            const Entity* parent = corpus.find(e.parent);
            if (!parent) throw Error("dangling parent: entity '" + e.id + "' references missing id '" + e.parent + "'");
            if (e.kind == EntityKind::RenderedView && parent->kind != EntityKind::Model) {
                throw Error("entity '" + e.id + "': view parent '" + e.parent + "' is not a shape");
            }
            if (e.kind == EntityKind::Part && parent->kind != EntityKind::RenderedView &&
                parent->kind != EntityKind::RealImage) {
                throw Error("entity '" + e.id + "': part parent '" + e.parent + "' is not a view or real image");
            }
        }
        if (e.descriptor.empty()) throw Error("entity '" + e.id + "': empty descriptor");
        for (double v : e.descriptor) {
            if (!std::isfinite(v)) throw Error("entity '" + e.id + "': non-finite descriptor value");
        }
    }
}

std::map<EntityKind, std::size_t> collect_dims(const Corpus& corpus) {
    std::map<EntityKind, std::size_t> dims;
    for (const Entity& e : corpus.entities) {
        auto [it, inserted] = dims.emplace(e.kind, e.descriptor.size());
        if (!inserted && it->second != e.descriptor.size()) {
            throw Error("entity '" + e.id + "': descriptor dim " + std::to_string(e.descriptor.size()) +
                        " differs from dim " + std::to_string(it->second) + " of other '" +
                        kind_name(e.kind) + "' entities");
        }
    }
    return dims;
}

} // namespace

Sidecar read_sidecar(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error("sidecar '" + path.string() + "': missing GWKG magic");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    Sidecar sc;
    sc.count = get_u32le(p + 4);
    sc.dim = get_u32le(p + 8);
    const std::size_t expected = 12 + std::size_t{4} * sc.count * sc.dim;
    if (bytes.size() != expected) {
        throw Error("sidecar '" + path.string() + "': size " + std::to_string(bytes.size()) +
                    " does not match header (expected " + std::to_string(expected) + ")");
    }
    sc.values.resize(std::size_t{sc.count} * sc.dim);
    for (std::size_t i = 0; i < sc.values.size(); ++i) {
        sc.values[i] = std::bit_cast<float>(get_u32le(p + 12 + 4 * i));
    }
    return sc;
}

std::string sidecar_bytes(const std::vector<Descriptor>& rows) {
    const std::uint32_t count = static_cast<std::uint32_t>(rows.size());
    const std::uint32_t dim = rows.empty() ? 0 : static_cast<std::uint32_t>(rows.front().size());
    std::string out;
    out.reserve(12 + std::size_t{4} * count * dim);
    out.append(kMagic, 4);
    put_u32le(out, count);
    put_u32le(out, dim);
    for (const Descriptor& row : rows) {
        if (row.size() != dim) throw Error("sidecar rows must share one dim");
        for (double v : row) {
            put_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    return out;
}

void write_sidecar(const std::filesystem::path& path, const std::vector<Descriptor>& rows) {
    atomic_write_file(path, sidecar_bytes(rows));
}

std::filesystem::path default_sidecar_path(const std::filesystem::path& manifest_path) {
    auto p = manifest_path;
    p.replace_extension(".gwkg");
    return p;
}

Corpus make_corpus(std::vector<Entity> entities) {
    Corpus corpus;
    corpus.entities = std::move(entities);
    for (std::size_t i = 0; i < corpus.entities.size(); ++i) {
        const auto& id = corpus.entities[i].id;
        if (id.empty()) throw Error("entity at position " + std::to_string(i) + ": empty id");
        if (!corpus.index.emplace(id, i).second) throw Error("duplicate id '" + id + "'");
    }
    validate_structure(corpus);
    corpus.kind_dims = collect_dims(corpus);
    return corpus;
}

Corpus load_manifest(const std::filesystem::path& manifest_path,
                     std::optional<std::filesystem::path> sidecar_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open manifest: " + manifest_path.string());

    std::vector<Entity> entities;
    std::vector<std::optional<std::uint32_t>> blob_refs;
    std::string line;
    std::size_t line_no = 0;
    bool any_blob = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "manifest line " + std::to_string(line_no);

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& ex) {
            throw Error(where + ": malformed JSON: " + ex.what());
        }
        if (!obj.is_object()) throw Error(where + ": expected a JSON object");

        Entity e;
        std::optional<std::uint32_t> blob;
        for (const auto& [key, value] : obj.items()) {
            if (key == "kind") {
                if (!value.is_string()) throw Error(where + ": 'kind' must be a string");
                auto kind = kind_from_name(value.get<std::string>());
                if (!kind || *kind == EntityKind::GeometricWord) {
                    throw Error(where + ": unknown kind '" + value.get<std::string>() + "'");
                }
                e.kind = *kind;
            } else if (key == "id") {
                if (!value.is_string()) throw Error(where + ": 'id' must be a string");
                e.id = value.get<std::string>();
            } else if (key == "label") {
                if (!value.is_string()) throw Error(where + ": 'label' must be a string");
                e.label = value.get<std::string>();
            } else if (key == "parent") {
                if (!value.is_string()) throw Error(where + ": 'parent' must be a string");
                e.parent = value.get<std::string>();
            } else if (key == "descriptor") {
                if (!value.is_array() || value.empty()) throw Error(where + ": 'descriptor' must be a non-empty array");
                for (const auto& num : value) {
                    if (!num.is_number()) throw Error(where + ": descriptor values must be numbers");
                    e.descriptor.push_back(num.get<double>());
                }
            } else if (key == "blob") {
                if (!value.is_number_unsigned()) throw Error(where + ": 'blob' must be an unsigned row index");
                blob = value.get<std::uint32_t>();
            } else {
                throw Error(where + ": unknown field '" + key + "'");
            }
        }
        if (!obj.contains("kind")) throw Error(where + ": missing 'kind'");
        if (e.id.empty()) throw Error(where + ": missing 'id'");
        if (e.descriptor.empty() == !blob.has_value()) {
            throw Error(where + ": exactly one of 'descriptor' or 'blob' is required");
        }
        if (blob) any_blob = true;
        blob_refs.push_back(blob);
        entities.push_back(std::move(e));
    }

    if (any_blob) {
        const auto sc_path = sidecar_path.value_or(default_sidecar_path(manifest_path));
        const Sidecar sc = read_sidecar(sc_path);
        for (std::size_t i = 0; i < entities.size(); ++i) {
            if (!blob_refs[i]) continue;
            const std::uint32_t row = *blob_refs[i];
            if (row >= sc.count) {
                throw Error("entity '" + entities[i].id + "': blob row " + std::to_string(row) +
                            " out of range (sidecar has " + std::to_string(sc.count) + " rows)");
            }
            entities[i].descriptor.assign(sc.row(row), sc.row(row) + sc.dim);
        }
    }

    return make_corpus(std::move(entities));
}

void save_manifest(const Corpus& corpus, const std::filesystem::path& manifest_path,
                   DescriptorStorage storage, std::optional<std::filesystem::path> sidecar_path) {
    std::string out;
    std::vector<Descriptor> rows;
    for (const Entity& e : corpus.entities) {
        json obj;
        obj["kind"] = kind_name(e.kind);
        obj["id"] = e.id;
        if (!e.label.empty()) obj["label"] = e.label;
        if (!e.parent.empty()) obj["parent"] = e.parent;
        if (storage == DescriptorStorage::Inline) {
            obj["descriptor"] = e.descriptor;
        } else {
            obj["blob"] = static_cast<std::uint32_t>(rows.size());
            rows.push_back(e.descriptor);
        }
        out += obj.dump();
        out += '\n';
    }
    if (storage == DescriptorStorage::Sidecar) {
        write_sidecar(sidecar_path.value_or(default_sidecar_path(manifest_path)), rows);
    }
    atomic_write_file(manifest_path, out);
}

CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats stats;
    for (const Entity& e : corpus.entities) {
        ++stats.kind_counts[e.kind];
        if (!e.label.empty()) ++stats.label_counts[e.label];
    }
    stats.kind_dims = corpus.kind_dims;
    return stats;
}

std::string stats_to_json(const CorpusStats& stats) {
    json obj;
    json counts = json::object();
    json dims = json::object();
    for (const auto& [kind, n] : stats.kind_counts) counts[kind_name(kind)] = n;
    for (const auto& [kind, d] : stats.kind_dims) dims[kind_name(kind)] = d;
    obj["counts"] = counts;
    obj["dims"] = dims;
    obj["labels"] = stats.label_counts;
    return obj.dump(2);
}

} // namespace gwkg::data
