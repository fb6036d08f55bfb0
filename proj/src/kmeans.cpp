#include "gwkg/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "gwkg/io_util.hpp"
#include "gwkg/kernels.hpp"
#include "gwkg/parallel.hpp"
#include "gwkg/rng.hpp"

namespace gwkg::vocab {

using nlohmann::json;

namespace {

std::size_t count_distinct(const std::vector<Descriptor>& points) {
    std::unordered_set<std::string> seen;
    for (const auto& p : points) {
        seen.emplace(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double));
    }
    return seen.size();
}

struct Assignment {
    std::vector<std::size_t> cluster;
    std::vector<double> dist2;
    double inertia = 0.0;
};

Assignment assign_all(const std::vector<Descriptor>& points, const Matrix& centroids) {
    Assignment out;
    const std::size_t n = points.size();
    const std::size_t k = centroids.rows();
    const std::size_t dim = centroids.cols();
    out.cluster.resize(n);
    out.dist2.resize(n);
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = kernels::dist2(points[i].data(), centroids.row(c), dim);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            out.cluster[i] = best_c;
            out.dist2[i] = best;
        }
    }, 64);
    for (double d : out.dist2) out.inertia += d;
    return out;
}

Matrix seed_plusplus(const std::vector<Descriptor>& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.size();
    const std::size_t dim = points.front().size();
    Matrix centroids(k, dim);

    const std::size_t first = static_cast<std::size_t>(rng.below(n));
    std::copy(points[first].begin(), points[first].end(), centroids.row(0));

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = kernels::dist2(points[i].data(), centroids.row(0), dim);
    }

    for (std::size_t c = 1; c < k; ++c) {
        const double total = kernels::sum(d2.data(), n);
        const double r = rng.uniform01() * total;
        double cum = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            cum += d2[i];
            if (cum > r && d2[i] > 0.0) {
                pick = i;
                break;
            }
        }
        if (pick == n) {
            // Rounding pushed r past the cumulative total; take the last
            // point that is not already a centroid.
            for (std::size_t i = n; i-- > 0;) {
                if (d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        std::copy(points[pick].begin(), points[pick].end(), centroids.row(c));
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], kernels::dist2(points[i].data(), centroids.row(c), dim));
        }
    }
    return centroids;
}

} // namespace

namespace detail {

Matrix update_means(const std::vector<Descriptor>& points,
                    const std::vector<std::size_t>& cluster_of,
                    const std::vector<double>& dist2_to_centroid, std::size_t k,
                    std::size_t* reseeds) {
    const std::size_t dim = points.front().size();
    Matrix next(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        kernels::axpy(1.0, points[i].data(), next.row(cluster_of[i]), dim);
        ++counts[cluster_of[i]];
    }
    std::vector<char> reseeded(points.size(), 0);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) {
            for (std::size_t j = 0; j < dim; ++j) next(c, j) /= static_cast<double>(counts[c]);
            continue;
        }
        double worst = -1.0;
        std::size_t pick = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!reseeded[i] && dist2_to_centroid[i] > worst) {
                worst = dist2_to_centroid[i];
                pick = i;
            }
        }
        reseeded[pick] = 1;
        if (reseeds) ++*reseeds;
        std::copy(points[pick].begin(), points[pick].end(), next.row(c));
    }
    return next;
}

} // namespace detail

Vocabulary kmeans_fit(const std::vector<Descriptor>& parts, std::size_t k,
                      const KmeansOptions& opts, KmeansTrace* trace) {
    if (parts.empty()) throw Error("kmeans_fit: empty input");
    if (k < 1) throw Error("kmeans_fit: k must be >= 1");
    const std::size_t dim = parts.front().size();
    for (const auto& p : parts) {
        if (p.size() != dim) throw Error("kmeans_fit: inconsistent descriptor dims");
    }
    const std::size_t distinct = count_distinct(parts);
    if (k > distinct) {
        throw Error("kmeans_fit: k=" + std::to_string(k) + " exceeds " + std::to_string(distinct) +
                    " distinct points");
    }

    Rng rng(derive_seed(opts.seed, /*tag=*/0x6b6d6561));  // stream tag: k-means
    Matrix centroids = seed_plusplus(parts, k, rng);

    double inertia = std::numeric_limits<double>::infinity();
    Matrix prev_centroids = centroids;
    const double tol2 = opts.tol * opts.tol;

    for (std::size_t iter = 0; iter < std::max<std::size_t>(opts.max_iters, 1); ++iter) {
        Assignment assign = assign_all(parts, centroids);
        if (assign.inertia > inertia) {
            // Floating-point plateau: a further step did not improve; keep
            // the previous state so the recorded objective never increases.
            centroids = prev_centroids;
            break;
        }
        inertia = assign.inertia;
        if (trace) trace->inertia_per_iter.push_back(inertia);
        prev_centroids = centroids;

        Matrix next = detail::update_means(parts, assign.cluster, assign.dist2, k,
                                           trace ? &trace->reseeds : nullptr);
        double shift2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift2 = std::max(shift2, kernels::dist2(next.row(c), centroids.row(c), dim));
        }
        centroids = std::move(next);
        if (shift2 < tol2) {
            Assignment final_assign = assign_all(parts, centroids);
            if (final_assign.inertia > inertia) {
                centroids = prev_centroids;
            } else {
                inertia = final_assign.inertia;
                if (trace) trace->inertia_per_iter.push_back(inertia);
            }
            break;
        }
    }

    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            if (kernels::dist2(centroids.row(a), centroids.row(b), dim) == 0.0) {
                throw Error("kmeans_fit: converged with identical centroids " +
                            std::to_string(a) + " and " + std::to_string(b));
            }
        }
    }

    Vocabulary vocab;
    vocab.k = k;
    vocab.centroids = std::move(centroids);
    vocab.inertia = inertia;
    vocab.seed = opts.seed;
    return vocab;
}

std::size_t assign_word(const Vocabulary& vocab, const Descriptor& part) {
    if (part.size() != vocab.dim()) {
        throw Error("assign_word: descriptor dim " + std::to_string(part.size()) +
                    " does not match vocabulary dim " + std::to_string(vocab.dim()));
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < vocab.k; ++c) {
        const double d = kernels::dist2(part.data(), vocab.centroids.row(c), vocab.dim());
        if (d < best) {
            best = d;
            best_c = c;
        }
    }
    return best_c;
}

ProjectionSet fit_projection_set(const data::Corpus& corpus, std::size_t target_dim) {
    std::size_t dim = target_dim;
    if (dim == 0) {
        dim = 128;
        for (const auto& [kind, kdim] : corpus.kind_dims) dim = std::min(dim, kdim);
    }
    ProjectionSet projections;
    for (const auto& [kind, kdim] : corpus.kind_dims) {
        if (kdim == dim) {
            projections.emplace(kind, PcaProjection::identity(dim));
            continue;
        }
        std::vector<Descriptor> vectors;
        for (const auto& e : corpus.entities) {
            if (e.kind == kind) vectors.push_back(e.descriptor);
        }
        projections.emplace(kind, fit_pca(vectors, dim));
    }
    return projections;
}

namespace {

json projection_to_json(const PcaProjection& proj) {
    json obj;
    if (proj.is_identity()) {
        obj["identity_dim"] = proj.identity_dim;
        return obj;
    }
    obj["mean"] = proj.mean;
    json comps = json::array();
    for (std::size_t r = 0; r < proj.components.rows(); ++r) {
        comps.push_back(std::vector<double>(proj.components.row(r),
                                            proj.components.row(r) + proj.components.cols()));
    }
    obj["components"] = comps;
    return obj;
}

PcaProjection projection_from_json(const json& obj) {
    PcaProjection proj;
    if (obj.contains("identity_dim")) {
        proj.identity_dim = obj.at("identity_dim").get<std::size_t>();
        return proj;
    }
    proj.mean = obj.at("mean").get<std::vector<double>>();
    const auto& comps = obj.at("components");
    proj.components = Matrix(comps.size(), proj.mean.size());
    for (std::size_t r = 0; r < comps.size(); ++r) {
        const auto row = comps[r].get<std::vector<double>>();
        if (row.size() != proj.mean.size()) throw Error("projection components/mean dim mismatch");
        std::copy(row.begin(), row.end(), proj.components.row(r));
    }
    return proj;
}

} // namespace

std::string vocab_to_json(const Vocabulary& vocab, const ProjectionSet& projections) {
    json obj;
    obj["k"] = vocab.k;
    obj["dim"] = vocab.dim();
    json cents = json::array();
    for (std::size_t r = 0; r < vocab.centroids.rows(); ++r) {
        cents.push_back(std::vector<double>(vocab.centroids.row(r),
                                            vocab.centroids.row(r) + vocab.dim()));
    }
    obj["centroids"] = cents;
    obj["inertia"] = vocab.inertia;
    obj["seed"] = vocab.seed;
    json projs = json::object();
    for (const auto& [kind, proj] : projections) {
        projs[data::kind_name(kind)] = projection_to_json(proj);
    }
    obj["projections"] = projs;
    return obj.dump(2);
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab,
                     const ProjectionSet& projections) {
    atomic_write_file(path, vocab_to_json(vocab, projections));
}

std::pair<Vocabulary, ProjectionSet> load_vocabulary(const std::filesystem::path& path) {
    json obj;
    try {
        obj = json::parse(read_file(path));
    } catch (const json::exception& ex) {
        throw Error("vocabulary '" + path.string() + "': " + ex.what());
    }
    Vocabulary vocab;
    vocab.k = obj.at("k").get<std::size_t>();
    vocab.inertia = obj.at("inertia").get<double>();
    vocab.seed = obj.at("seed").get<std::uint64_t>();
    const std::size_t dim = obj.at("dim").get<std::size_t>();
    const auto& cents = obj.at("centroids");
    if (cents.size() != vocab.k) throw Error("vocabulary centroid count does not match k");
    vocab.centroids = Matrix(vocab.k, dim);
    for (std::size_t r = 0; r < vocab.k; ++r) {
        const auto row = cents[r].get<std::vector<double>>();
        if (row.size() != dim) throw Error("vocabulary centroid dim mismatch");
        std::copy(row.begin(), row.end(), vocab.centroids.row(r));
    }
    ProjectionSet projections;
    if (obj.contains("projections")) {
        for (const auto& [name, pj] : obj.at("projections").items()) {
            auto kind = data::kind_from_name(name);
            if (!kind) throw Error("vocabulary projection for unknown kind '" + name + "'");
            projections.emplace(*kind, projection_from_json(pj));
        }
    }
    return {std::move(vocab), std::move(projections)};
}

} // namespace gwkg::vocab
