#include "gwkg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "gwkg/io_util.hpp"
#include "gwkg/kernels.hpp"
#include "gwkg/rng.hpp"

namespace gwkg::synth {

using data::Descriptor;
using data::Entity;
using data::EntityKind;
using nlohmann::json;

namespace {

constexpr std::uint64_t kProtoTag = 0x70726f74;
constexpr std::uint64_t kWordsTag = 0x63777264;
constexpr std::uint64_t kShapeTag = 0x73686170;
constexpr std::uint64_t kImageTag = 0x696d6167;

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::string format_id(const char* fmt, std::size_t a, std::size_t b = 0, std::size_t c = 0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, a, b, c);
    return buf;
}

Matrix sample_prototypes(const SynthConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, kProtoTag));
    Matrix protos(cfg.true_words, cfg.dim);
    const double min_d2 = cfg.prototype_separation * cfg.prototype_separation;
    for (std::size_t w = 0; w < cfg.true_words; ++w) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            Descriptor cand(cfg.dim);
            for (double& x : cand) x = f32(rng.gaussian(0.0, cfg.prototype_separation));
            placed = true;
            for (std::size_t prev = 0; prev < w; ++prev) {
                if (kernels::dist2(cand.data(), protos.row(prev), cfg.dim) < min_d2) {
                    placed = false;
                    break;
                }
            }
            if (placed) std::copy(cand.begin(), cand.end(), protos.row(w));
        }
        if (!placed) {
            throw Error("synthgen: prototype separation " +
                        std::to_string(cfg.prototype_separation) + " infeasible at dim " +
                        std::to_string(cfg.dim) + " (rejection budget exhausted)");
        }
    }
    return protos;
}

std::vector<std::vector<std::size_t>> draw_class_words(const SynthConfig& cfg) {
    std::vector<std::vector<std::size_t>> class_words(cfg.classes);
    if (cfg.disjoint_words) {
        for (std::size_t c = 0; c < cfg.classes; ++c) {
            for (std::size_t w = 0; w < cfg.words_per_class; ++w) {
                class_words[c].push_back(c * cfg.words_per_class + w);
            }
        }
        return class_words;
    }
    Rng rng(derive_seed(cfg.seed, kWordsTag));
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        for (int attempt = 0;; ++attempt) {
            auto subset = rng.sample_without_replacement(cfg.true_words, cfg.words_per_class);
            std::sort(subset.begin(), subset.end());
            // Two classes built from the same word set would be mutually
            // indistinguishable; redraw unless there is no alternative.
            if (seen.insert(subset).second || attempt >= 200) {
                class_words[c] = std::move(subset);
                break;
            }
        }
    }
    return class_words;
}

Descriptor noisy_prototype(const Matrix& protos, std::size_t word, double sigma, Rng& rng) {
    Descriptor d(protos.cols());
    for (std::size_t j = 0; j < protos.cols(); ++j) {
        d[j] = f32(protos(word, j) + (sigma > 0.0 ? rng.gaussian(0.0, sigma) : 0.0));
    }
    return d;
}

Descriptor f32_mean(const std::vector<Descriptor>& rows) {
    Descriptor mean(rows.front().size(), 0.0);
    for (const Descriptor& r : rows) kernels::axpy(1.0, r.data(), mean.data(), mean.size());
    for (double& v : mean) v = f32(v / static_cast<double>(rows.size()));
    return mean;
}

} // namespace

void SynthConfig::validate() const {
    if (classes < 1 || shapes_per_class < 1 || true_words < 1 || words_per_class < 1 ||
        views_per_shape < 1 || parts_per_view < 1 || dim < 1) {
        throw Error("synthgen: all counts must be >= 1");
    }
    if (words_per_class > true_words) {
        throw Error("synthgen: words_per_class exceeds true_words");
    }
    if (noise_sigma < 0.0) throw Error("synthgen: noise_sigma must be nonnegative");
    if (prototype_separation <= 0.0) throw Error("synthgen: prototype_separation must be positive");
    if (disjoint_words && classes * words_per_class > true_words) {
        throw Error("synthgen: disjoint word sets need classes * words_per_class <= true_words");
    }
}

SynthWorld generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthWorld world;
    world.prototypes = sample_prototypes(cfg);
    world.class_words = draw_class_words(cfg);

    std::vector<Entity> entities;
    auto add = [&](std::string id, EntityKind kind, std::string label, std::string parent,
                   Descriptor desc) {
        Entity e;
        e.id = std::move(id);
        e.kind = kind;
        e.label = std::move(label);
        e.parent = std::move(parent);
        e.descriptor = std::move(desc);
        entities.push_back(std::move(e));
    };

    for (std::size_t c = 0; c < cfg.classes; ++c) {
        const std::string label = format_id("class%02zu", c);
        const auto& words = world.class_words[c];
        for (std::size_t s = 0; s < cfg.shapes_per_class; ++s) {
            Rng rng(derive_seed(cfg.seed, kShapeTag, c * cfg.shapes_per_class + s));
            const std::string shape_id = format_id("c%02zus%03zu", c, s);

            std::vector<std::vector<Descriptor>> view_parts(cfg.views_per_shape);
            std::vector<Descriptor> all_parts;
            for (std::size_t v = 0; v < cfg.views_per_shape; ++v) {
                for (std::size_t p = 0; p < cfg.parts_per_view; ++p) {
                    const std::size_t word = words[(v * cfg.parts_per_view + p) % words.size()];
                    view_parts[v].push_back(noisy_prototype(world.prototypes, word,
                                                            cfg.noise_sigma, rng));
                    all_parts.push_back(view_parts[v].back());
                }
            }

            add(shape_id, EntityKind::Model, label, "", f32_mean(all_parts));
            world.truth[shape_id] = label;
            for (std::size_t v = 0; v < cfg.views_per_shape; ++v) {
                const std::string view_id = format_id("c%02zus%03zuv%zu", c, s, v);
                add(view_id, EntityKind::RenderedView, "", shape_id, f32_mean(view_parts[v]));
                for (std::size_t p = 0; p < cfg.parts_per_view; ++p) {
                    add(view_id + "p" + std::to_string(p), EntityKind::Part, "", view_id,
                        view_parts[v][p]);
                }
            }
        }
    }

    for (std::size_t c = 0; c < cfg.classes; ++c) {
        const std::string label = format_id("class%02zu", c);
        const auto& words = world.class_words[c];
        for (std::size_t i = 0; i < cfg.images_per_class; ++i) {
            Rng rng(derive_seed(cfg.seed, kImageTag, c * cfg.images_per_class + i));
            const std::string image_id = format_id("c%02zui%03zu", c, i);

            std::vector<Descriptor> parts;
            for (std::size_t p = 0; p < cfg.parts_per_view; ++p) {
                parts.push_back(noisy_prototype(world.prototypes, words[p % words.size()],
                                                cfg.noise_sigma, rng));
            }
            add(image_id, EntityKind::RealImage, label, "", f32_mean(parts));
            world.truth[image_id] = label;
            for (std::size_t p = 0; p < cfg.parts_per_view; ++p) {
                add(image_id + "p" + std::to_string(p), EntityKind::Part, "", image_id,
                    std::move(parts[p]));
            }
        }
    }

    world.corpus = data::make_corpus(std::move(entities));
    return world;
}

void write_world(const SynthWorld& world, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    data::save_manifest(world.corpus, out_dir / "world.jsonl", data::DescriptorStorage::Sidecar);
    const json truth(world.truth);
    atomic_write_file(out_dir / "truth.json", truth.dump(2));
}

std::map<std::string, std::string> load_truth(const std::filesystem::path& path) {
    json obj;
    try {
        obj = json::parse(read_file(path));
    } catch (const json::exception& ex) {
        throw Error("truth '" + path.string() + "': " + ex.what());
    }
    std::map<std::string, std::string> truth;
    for (const auto& [key, value] : obj.items()) truth[key] = value.get<std::string>();
    return truth;
}

} // namespace gwkg::synth
