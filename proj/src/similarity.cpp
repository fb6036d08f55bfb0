#include "gwkg/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "gwkg/io_util.hpp"
#include "gwkg/kernels.hpp"

namespace gwkg::sim {

using nlohmann::json;

namespace {

constexpr double kWeightTol = 1e-9;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_convex(std::initializer_list<double> ws, const char* what) {
    double total = 0.0;
    for (double w : ws) {
        if (w < 0.0) throw Error(std::string(what) + ": weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > kWeightTol) {
        throw Error(std::string(what) + ": weights must sum to 1 (got " + std::to_string(total) + ")");
    }
}

} // namespace

void ChannelWeights::validate_shape() const {
    check_convex({alpha, beta, gamma, lambda}, "shape-query weights");
}

void ChannelWeights::validate_image() const {
    check_convex({beta_star, gamma_star, lambda_star}, "image-query weights");
}

double sim_entity(const double* a, const double* b, std::size_t n) {
    const double na = kernels::dot(a, a, n);
    const double nb = kernels::dot(b, b, n);
    if (na == 0.0 || nb == 0.0) throw Error("sim_entity: undefined cosine for a zero vector");
    const double cosine = kernels::dot(a, b, n) / std::sqrt(na * nb);
    return clamp01(0.5 * (1.0 + cosine));
}

double sim_entity(const Descriptor& a, const Descriptor& b) {
    if (a.size() != b.size()) throw Error("sim_entity: dim mismatch");
    return sim_entity(a.data(), b.data(), a.size());
}

double sim_views(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b) {
    if (a.empty() || b.empty()) throw Error("sim_views: empty embedding set");
    double best = 0.0;
    for (const auto& fa : a) {
        for (const auto& fb : b) best = std::max(best, sim_entity(fa, fb));
    }
    return best;
}

double sim_words(const std::vector<std::size_t>& a_words, const std::vector<std::size_t>& b_words) {
    const std::set<std::size_t> a(a_words.begin(), a_words.end());
    const std::set<std::size_t> b(b_words.begin(), b_words.end());
    std::size_t shared = 0;
    for (std::size_t w : a) shared += b.count(w);
    if (shared == 0) return 0.0;
    // sigmoid(ln c) in closed form.
    return static_cast<double>(shared) / (static_cast<double>(shared) + 1.0);
}

MatchingResult max_weight_matching(const Matrix& weights) {
    const std::size_t m = weights.rows();
    const std::size_t n = weights.cols();
    if (m == 0 || n == 0) throw Error("max_weight_matching: empty weight matrix");
    const std::size_t s = std::max(m, n);

    // Min-cost square assignment with potentials (Kuhn-Munkres); maximizing
    // weight means cost = -weight, with 0-cost padding for the dummy slots.
    auto cost = [&](std::size_t i, std::size_t j) {
        return (i < m && j < n) ? -weights(i, j) : 0.0;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(s + 1, 0.0), v(s + 1, 0.0);
    std::vector<std::size_t> way(s + 1, 0), match_col(s + 1, 0);  // match_col[j]: row matched to column j

    for (std::size_t i = 1; i <= s; ++i) {
        match_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(s + 1, inf);
        std::vector<char> used(s + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match_col[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= s; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= s; ++j) {
                if (used[j]) {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    MatchingResult result;
    result.match_of_row.assign(m, static_cast<std::size_t>(-1));
    for (std::size_t j = 1; j <= s; ++j) {
        const std::size_t i = match_col[j];
        if (i >= 1 && i <= m && j <= n) {
            result.match_of_row[i - 1] = j - 1;
            result.total += weights(i - 1, j - 1);
        }
    }
    return result;
}

double sim_parts(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b) {
    if (a.empty() || b.empty()) throw Error("sim_parts: empty embedding set");
    Matrix w(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) w(i, j) = sim_entity(a[i], b[j]);
    }
    const MatchingResult match = max_weight_matching(w);
    return clamp01(match.total / static_cast<double>(std::min(a.size(), b.size())));
}

const char* mode_name(QueryMode mode) {
    switch (mode) {
        case QueryMode::Shape: return "shape";
        case QueryMode::Image: return "image";
        case QueryMode::Parts: return "parts";
    }
    return "?";
}

Scorer::Scorer(const graph::ShapeGraph& graph, const Matrix& embeddings)
    : graph_(graph), emb_(embeddings) {
    if (embeddings.rows() < graph.size()) {
        throw Error("scorer: embedding rows do not cover the graph nodes");
    }
}

Scorer::EntitySets Scorer::sets_for(std::size_t node) const {
    EntitySets sets;
    const std::size_t dim = emb_.cols();
    sets.self.assign(emb_.row(node), emb_.row(node) + dim);
    if (graph_.nodes[node].kind == data::EntityKind::Model) {
        for (std::size_t view : graph_.views_of(node)) {
            sets.views.emplace_back(emb_.row(view), emb_.row(view) + dim);
        }
    }
    for (std::size_t part : graph_.parts_of(node)) {
        sets.parts.emplace_back(emb_.row(part), emb_.row(part) + dim);
    }
    sets.words = graph_.word_set_of(node);
    return sets;
}

double Scorer::score_shape_query(std::size_t query_node, std::size_t candidate_node,
                                 const ChannelWeights& w, ChannelScores* channels) const {
    w.validate_shape();
    ChannelScores cs;
    if (query_node == candidate_node) {
        // Self comparison: every channel is maximal by convention, including
        // the word channel whose overlap form saturates below 1.
        cs = {1.0, 1.0, 1.0, 1.0};
    } else {
        const EntitySets q = sets_for(query_node);
        const EntitySets m = sets_for(candidate_node);
        cs.sm = sim_entity(q.self, m.self);
        cs.si = (q.views.empty() || m.views.empty()) ? 0.0 : sim_views(q.views, m.views);
        cs.sp = (q.parts.empty() || m.parts.empty()) ? 0.0 : sim_parts(q.parts, m.parts);
        cs.sg = sim_words(q.words, m.words);
    }
    if (channels) *channels = cs;
    return w.alpha * cs.sm + w.beta * cs.si + w.gamma * cs.sp + w.lambda * cs.sg;
}

double Scorer::score_image_query(std::size_t image_node, std::size_t candidate_node,
                                 const ChannelWeights& w, ChannelScores* channels) const {
    w.validate_image();
    const EntitySets q = sets_for(image_node);
    const EntitySets m = sets_for(candidate_node);
    ChannelScores cs;
    cs.si = m.views.empty() ? 0.0 : sim_views({q.self}, m.views);
    cs.sp = (q.parts.empty() || m.parts.empty()) ? 0.0 : sim_parts(q.parts, m.parts);
    cs.sg = sim_words(q.words, m.words);
    if (channels) *channels = cs;
    return w.beta_star * cs.si + w.gamma_star * cs.sp + w.lambda_star * cs.sg;
}

double Scorer::score_parts_query(std::size_t query_node, std::size_t candidate_node,
                                 const ChannelWeights& w, ChannelScores* channels) const {
    const double denom = w.gamma + w.lambda;
    if (denom <= 0.0) throw Error("parts query requires gamma + lambda > 0");
    ChannelScores cs;
    if (query_node == candidate_node) {
        cs = {1.0, 1.0, 1.0, 1.0};
    } else {
        const EntitySets q = sets_for(query_node);
        const EntitySets m = sets_for(candidate_node);
        cs.sp = (q.parts.empty() || m.parts.empty()) ? 0.0 : sim_parts(q.parts, m.parts);
        cs.sg = sim_words(q.words, m.words);
    }
    if (channels) *channels = cs;
    return (w.gamma * cs.sp + w.lambda * cs.sg) / denom;
}

RetrievalResult retrieve(const graph::ShapeGraph& graph, const Matrix& embeddings,
                         const std::string& query_id, QueryMode mode, const ChannelWeights& w,
                         std::size_t top_n) {
    const auto query = graph.find(query_id);
    if (!query) throw Error("retrieve: unknown query id '" + query_id + "'");
    const auto kind = graph.nodes[*query].kind;
    if (mode == QueryMode::Shape && kind != data::EntityKind::Model) {
        throw Error("retrieve: shape mode requires a shape query");
    }
    if (mode == QueryMode::Image && kind != data::EntityKind::RealImage) {
        throw Error("retrieve: image mode requires a real-image query");
    }
    if (mode == QueryMode::Parts && kind != data::EntityKind::Model &&
        kind != data::EntityKind::RealImage) {
        throw Error("retrieve: parts mode requires a shape or real-image query");
    }
    if (mode == QueryMode::Image && graph.parts_of(*query).empty() && w.gamma_star > 0.0) {
        throw Error("retrieve: image query requires parts (or weights with gamma*=0)");
    }

    const Scorer scorer(graph, embeddings);
    RetrievalResult result;
    result.query = query_id;
    result.mode = mode;
    result.weights = w;

    for (std::size_t m : graph.model_nodes()) {
        if (m == *query) continue;
        ScoredCandidate cand;
        cand.id = graph.nodes[m].id;
        switch (mode) {
            case QueryMode::Shape:
                cand.score = scorer.score_shape_query(*query, m, w, &cand.channels);
                break;
            case QueryMode::Image:
                cand.score = scorer.score_image_query(*query, m, w, &cand.channels);
                break;
            case QueryMode::Parts:
                cand.score = scorer.score_parts_query(*query, m, w, &cand.channels);
                break;
        }
        result.results.push_back(std::move(cand));
    }
    if (result.results.empty()) throw Error("retrieve: empty candidate set");

    std::sort(result.results.begin(), result.results.end(),
              [](const ScoredCandidate& a, const ScoredCandidate& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.id < b.id;
              });
    if (top_n > 0 && result.results.size() > top_n) result.results.resize(top_n);
    return result;
}

std::string retrieval_to_json(const RetrievalResult& result) {
    json obj;
    obj["query"] = result.query;
    obj["mode"] = mode_name(result.mode);
    if (result.mode == QueryMode::Image) {
        obj["weights"] = {{"beta_star", result.weights.beta_star},
                          {"gamma_star", result.weights.gamma_star},
                          {"lambda_star", result.weights.lambda_star}};
    } else {
        obj["weights"] = {{"alpha", result.weights.alpha},
                          {"beta", result.weights.beta},
                          {"gamma", result.weights.gamma},
                          {"lambda", result.weights.lambda}};
    }
    json items = json::array();
    for (const ScoredCandidate& c : result.results) {
        items.push_back({{"id", c.id},
                         {"score", c.score},
                         {"channels",
                          {{"sm", c.channels.sm},
                           {"si", c.channels.si},
                           {"sp", c.channels.sp},
                           {"sg", c.channels.sg}}}});
    }
    obj["results"] = std::move(items);
    return obj.dump(2);
}

} // namespace gwkg::sim
