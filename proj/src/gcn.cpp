#include "gwkg/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "gwkg/io_util.hpp"
#include "gwkg/kernels.hpp"
#include "gwkg/rng.hpp"

namespace gwkg::embed {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;
constexpr std::uint64_t kPairTag = 0x70616972;

double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double d) {
    if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
    const double e = std::exp(d);
    return e / (1.0 + e);
}

struct ForwardPass {
    std::vector<Matrix> propagated;  // M_l = S * H_l
    std::vector<Matrix> pre_act;     // Z_l = M_l * W_l
    Matrix output;                   // H_L
};

void check_dims(const graph::ShapeGraph& graph, const std::vector<Matrix>& weights) {
    if (weights.empty()) throw Error("gcn: at least one layer required");
    std::size_t dim = graph.features.cols();
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != dim) {
            throw Error("gcn: layer " + std::to_string(l) + " expects input dim " +
                        std::to_string(weights[l].rows()) + " but gets " + std::to_string(dim));
        }
        dim = weights[l].cols();
    }
}

ForwardPass forward_pass(const graph::ShapeGraph& graph, const std::vector<Matrix>& weights,
                         const Matrix& features) {
    check_dims(graph, weights);
    const std::size_t layers = weights.size();
    ForwardPass fp;
    fp.propagated.reserve(layers);
    fp.pre_act.reserve(layers);

    Matrix h = features;
    for (std::size_t l = 0; l < layers; ++l) {
        fp.propagated.push_back(graph.norm_adj.multiply(h));
        fp.pre_act.push_back(matmul(fp.propagated.back(), weights[l]));
        h = fp.pre_act.back();
        if (l + 1 < layers) {
            for (double* p = h.data(); p != h.data() + h.rows() * h.cols(); ++p) {
                if (*p < 0.0) *p = 0.0;
            }
        }
    }
    fp.output = std::move(h);
    return fp;
}

struct LossGrad {
    double loss = 0.0;
    Matrix grad;  // dL/dY
};

LossGrad pair_loss_grad(const Matrix& y, const std::vector<PairSample>& samples,
                        bool want_grad) {
    LossGrad out;
    if (want_grad) out.grad = Matrix(y.rows(), y.cols());
    const std::size_t dim = y.cols();
    for (const PairSample& s : samples) {
        const double* yi = y.row(s.anchor);
        for (std::uint32_t j : s.positives) {
            const double d = kernels::dot(yi, y.row(j), dim);
            out.loss += softplus(-d);
            if (want_grad) {
                const double g = sigmoid(d) - 1.0;
                kernels::axpy(g, y.row(j), out.grad.row(s.anchor), dim);
                kernels::axpy(g, yi, out.grad.row(j), dim);
            }
        }
        for (std::uint32_t k : s.negatives) {
            const double d = kernels::dot(yi, y.row(k), dim);
            out.loss += softplus(d);
            if (want_grad) {
                const double g = sigmoid(d);
                kernels::axpy(g, y.row(k), out.grad.row(s.anchor), dim);
                kernels::axpy(g, yi, out.grad.row(k), dim);
            }
        }
    }
    return out;
}

std::vector<Matrix> backward_pass(const graph::ShapeGraph& graph,
                                  const std::vector<Matrix>& weights, const ForwardPass& fp,
                                  Matrix grad_output) {
    const std::size_t layers = weights.size();
    std::vector<Matrix> grads(layers);
    Matrix g = std::move(grad_output);  // dL/dH_{l+1} while descending
    for (std::size_t l = layers; l-- > 0;) {
        if (l + 1 < layers) {
            // ReLU was applied to pre_act[l] on the way up.
            const Matrix& z = fp.pre_act[l];
            for (std::size_t idx = 0; idx < z.rows() * z.cols(); ++idx) {
                if (z.data()[idx] <= 0.0) g.data()[idx] = 0.0;
            }
        }
        grads[l] = matmul_transpose_a(fp.propagated[l], g);
        if (l > 0) {
            g = graph.norm_adj.multiply(matmul_transpose_b(g, weights[l]));
        }
    }
    return grads;
}

} // namespace

std::vector<Matrix> init_weights(const GcnConfig& config) {
    if (config.layer_dims.size() < 2) throw Error("gcn: layer_dims needs input and output dims");
    std::vector<Matrix> weights;
    weights.reserve(config.layer_dims.size() - 1);
    for (std::size_t l = 0; l + 1 < config.layer_dims.size(); ++l) {
        const std::size_t fan_in = config.layer_dims[l];
        const std::size_t fan_out = config.layer_dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_in, fan_out);
        Rng rng(derive_seed(config.seed, kInitTag, l));
        for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
            w.data()[i] = rng.uniform(-limit, limit);
        }
        weights.push_back(std::move(w));
    }
    return weights;
}

Matrix FeatureScaler::apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw Error("feature scaler: dim mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out(i, j) = (x(i, j) - mean[j]) * inv_std[j];
        }
    }
    return out;
}

FeatureScaler fit_scaler(const Matrix& x) {
    FeatureScaler s;
    const std::size_t n = std::max<std::size_t>(x.rows(), 1);
    s.mean.assign(x.cols(), 0.0);
    s.inv_std.assign(x.cols(), 1.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) s.mean[j] += x(i, j);
    }
    for (double& m : s.mean) m /= static_cast<double>(n);
    std::vector<double> var(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double d = x(i, j) - s.mean[j];
            var[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double sd = std::sqrt(var[j] / static_cast<double>(n));
        if (sd > 0.0) s.inv_std[j] = 1.0 / sd;
    }
    return s;
}

Matrix gcn_forward(const graph::ShapeGraph& graph, const std::vector<Matrix>& weights) {
    return forward_pass(graph, weights, graph.features).output;
}

Matrix gcn_forward(const graph::ShapeGraph& graph, const std::vector<Matrix>& weights,
                   const Matrix& features) {
    return forward_pass(graph, weights, features).output;
}

double pair_loss(const Matrix& y, const std::vector<PairSample>& samples) {
    return pair_loss_grad(y, samples, /*want_grad=*/false).loss;
}

std::vector<PairSample> sample_pairs(const graph::ShapeGraph& graph, std::size_t neg_ratio,
                                     std::uint64_t seed) {
    const std::size_t n = graph.size();
    Rng rng(derive_seed(seed, kPairTag));
    std::vector<PairSample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& nbrs = graph.neighbors[i];
        if (nbrs.empty()) continue;
        PairSample s;
        s.anchor = static_cast<std::uint32_t>(i);
        s.positives = nbrs;

        const std::size_t want = neg_ratio * nbrs.size();
        const std::size_t avail = n - 1 - nbrs.size();
        const std::size_t take = std::min(want, avail);
        if (take > 0 && take * 2 >= avail) {
            // Dense request: enumerate non-neighbors and partial-shuffle.
            std::vector<std::uint32_t> pool;
            pool.reserve(avail);
            for (std::uint32_t cand = 0; cand < n; ++cand) {
                if (cand == i) continue;
                if (std::binary_search(nbrs.begin(), nbrs.end(), cand)) continue;
                pool.push_back(cand);
            }
            for (std::size_t t = 0; t < take; ++t) {
                const std::size_t j = t + static_cast<std::size_t>(rng.below(pool.size() - t));
                std::swap(pool[t], pool[j]);
                s.negatives.push_back(pool[t]);
            }
        } else if (take > 0) {
            std::unordered_set<std::uint32_t> used;
            while (s.negatives.size() < take) {
                const auto cand = static_cast<std::uint32_t>(rng.below(n));
                if (cand == i) continue;
                if (std::binary_search(nbrs.begin(), nbrs.end(), cand)) continue;
                if (!used.insert(cand).second) continue;
                s.negatives.push_back(cand);
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

EmbeddingTable train(const graph::ShapeGraph& graph, const GcnConfig& config) {
    if (config.layer_dims.empty() || config.layer_dims.front() != graph.features.cols()) {
        throw Error("gcn: layer_dims[0] must equal the graph feature dim " +
                    std::to_string(graph.features.cols()));
    }
    if (config.neg_ratio < 1) throw Error("gcn: neg_ratio must be >= 1");

    EmbeddingTable table;
    table.weights = init_weights(config);
    table.scaler = fit_scaler(graph.features);
    const Matrix features = table.scaler.apply(graph.features);

    std::vector<PairSample> samples;
    if (config.freeze_negatives) {
        samples = sample_pairs(graph, config.neg_ratio, derive_seed(config.seed, kPairTag, 0));
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (!config.freeze_negatives) {
            samples = sample_pairs(graph, config.neg_ratio,
                                   derive_seed(config.seed, kPairTag, epoch));
        }
        ForwardPass fp = forward_pass(graph, table.weights, features);
        LossGrad lg = pair_loss_grad(fp.output, samples, /*want_grad=*/true);
        if (!std::isfinite(lg.loss)) {
            throw Error("gcn: training diverged at epoch " + std::to_string(epoch) +
                        " (non-finite loss); lower the learning rate");
        }
        table.epoch_losses.push_back(lg.loss);
        if (config.tol && epoch > 0 &&
            std::abs(table.epoch_losses[epoch - 1] - lg.loss) < *config.tol) {
            break;
        }
        // The recorded loss is the plain sum over pairs; the step uses the
        // pair-mean gradient so the learning rate is independent of how many
        // pairs the epoch sampled.
        std::size_t pair_count = 0;
        for (const PairSample& s : samples) pair_count += s.positives.size() + s.negatives.size();
        const double step = config.learning_rate / static_cast<double>(std::max<std::size_t>(pair_count, 1));
        const auto grads = backward_pass(graph, table.weights, fp, std::move(lg.grad));
        for (std::size_t l = 0; l < table.weights.size(); ++l) {
            kernels::axpy(-step, grads[l].data(), table.weights[l].data(),
                          grads[l].rows() * grads[l].cols());
        }
    }

    table.embeddings = forward_pass(graph, table.weights, features).output;
    if (table.epoch_losses.empty()) {
        const auto samples = sample_pairs(graph, config.neg_ratio,
                                          derive_seed(config.seed, kPairTag, 0));
        table.final_loss = pair_loss(table.embeddings, samples);
    } else {
        table.final_loss = table.epoch_losses.back();
    }
    for (double v : table.embeddings.values()) {
        if (!std::isfinite(v)) throw Error("gcn: non-finite embedding after training");
    }
    return table;
}

GradCheckResult grad_check(const graph::ShapeGraph& graph, const GcnConfig& config,
                           double epsilon) {
    std::vector<Matrix> weights = init_weights(config);
    const auto samples = sample_pairs(graph, config.neg_ratio,
                                      derive_seed(config.seed, kPairTag, 0));
    const Matrix features = fit_scaler(graph.features).apply(graph.features);

    ForwardPass fp = forward_pass(graph, weights, features);
    LossGrad lg = pair_loss_grad(fp.output, samples, /*want_grad=*/true);
    const auto analytic = backward_pass(graph, weights, fp, std::move(lg.grad));

    GradCheckResult result;
    result.min_preactivation = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < weights.size(); ++l) {
        for (double z : fp.pre_act[l].values()) {
            result.min_preactivation = std::min(result.min_preactivation, std::abs(z));
        }
    }

    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t idx = 0; idx < weights[l].rows() * weights[l].cols(); ++idx) {
            const double saved = weights[l].data()[idx];
            weights[l].data()[idx] = saved + epsilon;
            const double up = pair_loss(forward_pass(graph, weights, features).output, samples);
            weights[l].data()[idx] = saved - epsilon;
            const double down = pair_loss(forward_pass(graph, weights, features).output, samples);
            weights[l].data()[idx] = saved;

            const double fd = (up - down) / (2.0 * epsilon);
            const double an = analytic[l].data()[idx];
            const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            result.max_rel_error = std::max(result.max_rel_error, rel);
        }
    }
    return result;
}

Matrix embed_query(const graph::ShapeGraph& augmented_graph, const EmbeddingTable& table) {
    return forward_pass(augmented_graph, table.weights,
                        table.scaler.apply(augmented_graph.features))
        .output;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& base_path) {
    json obj;
    json ws = json::array();
    for (const Matrix& w : table.weights) {
        json rows = json::array();
        for (std::size_t r = 0; r < w.rows(); ++r) {
            rows.push_back(std::vector<double>(w.row(r), w.row(r) + w.cols()));
        }
        ws.push_back(std::move(rows));
    }
    obj["weights"] = std::move(ws);
    obj["feature_scale"] = {{"mean", table.scaler.mean}, {"inv_std", table.scaler.inv_std}};
    obj["final_loss"] = table.final_loss;
    obj["embedding_dim"] = table.embeddings.cols();
    obj["node_count"] = table.embeddings.rows();

    auto json_path = base_path;
    json_path.replace_extension(".json");
    atomic_write_file(json_path, obj.dump(2));

    auto emb_path = base_path;
    emb_path.replace_extension(".gwkg");
    std::vector<data::Descriptor> rows;
    rows.reserve(table.embeddings.rows());
    for (std::size_t i = 0; i < table.embeddings.rows(); ++i) {
        rows.emplace_back(table.embeddings.row(i), table.embeddings.row(i) + table.embeddings.cols());
    }
    data::write_sidecar(emb_path, rows);

    auto csv_path = base_path;
    csv_path.replace_extension(".loss.csv");
    std::string csv = "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < table.epoch_losses.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e, table.epoch_losses[e]);
        csv += buf;
    }
    atomic_write_file(csv_path, csv);
}

EmbeddingTable load_table(const std::filesystem::path& base_path) {
    auto json_path = base_path;
    json_path.replace_extension(".json");
    json obj;
    try {
        obj = json::parse(read_file(json_path));
    } catch (const json::exception& ex) {
        throw Error("embedding table '" + json_path.string() + "': " + ex.what());
    }
    EmbeddingTable table;
    for (const auto& w : obj.at("weights")) {
        const std::size_t rows = w.size();
        const std::size_t cols = w.at(0).size();
        Matrix m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = w.at(r).get<std::vector<double>>();
            if (row.size() != cols) throw Error("embedding table: ragged weight matrix");
            std::copy(row.begin(), row.end(), m.row(r));
        }
        table.weights.push_back(std::move(m));
    }
    table.scaler.mean = obj.at("feature_scale").at("mean").get<std::vector<double>>();
    table.scaler.inv_std = obj.at("feature_scale").at("inv_std").get<std::vector<double>>();
    table.final_loss = obj.at("final_loss").get<double>();

    auto emb_path = base_path;
    emb_path.replace_extension(".gwkg");
    const data::Sidecar sc = data::read_sidecar(emb_path);
    table.embeddings = Matrix(sc.count, sc.dim);
    for (std::size_t i = 0; i < sc.count; ++i) {
        for (std::size_t j = 0; j < sc.dim; ++j) table.embeddings(i, j) = sc.row(i)[j];
    }
    return table;
}

} // namespace gwkg::embed
