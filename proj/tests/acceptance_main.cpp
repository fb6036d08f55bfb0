// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero if any fail.
//
//   acceptance [--cli <path-to-gwkg>] [criterion numbers...]
//
// The synthetic benchmark pipeline (world -> vocabulary -> graph -> trained
// embeddings) is built once and shared by the criteria that need it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gwkg/datamodel.hpp"
#include "gwkg/gcn.hpp"
#include "gwkg/io_util.hpp"
#include "gwkg/kgraph.hpp"
#include "gwkg/kmeans.hpp"
#include "gwkg/metrics.hpp"
#include "gwkg/rng.hpp"
#include "gwkg/similarity.hpp"
#include "gwkg/synthgen.hpp"

namespace fs = std::filesystem;
using namespace gwkg;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------- fixture --

struct Pipeline {
    synth::SynthWorld world;
    vocab::Vocabulary vocabulary;
    vocab::KmeansTrace kmeans_trace;
    vocab::ProjectionSet projections;
    graph::ShapeGraph supervised_graph;
    embed::EmbeddingTable table;  // trained on the supervised graph
    double train_seconds = 0.0;
};

embed::GcnConfig benchmark_gcn_config(std::size_t input_dim) {
    embed::GcnConfig cfg;
    cfg.layer_dims = {input_dim, 128, 64};
    cfg.learning_rate = 1e-3;
    cfg.epochs = 300;
    cfg.neg_ratio = 5;
    cfg.seed = 7;
    cfg.freeze_negatives = true;  // fixed objective so the loss curve is comparable
    return cfg;
}

vocab::ProjectionSet identity_projections(const data::Corpus& corpus) {
    vocab::ProjectionSet projections;
    for (const auto& [kind, dim] : corpus.kind_dims) {
        projections.emplace(kind, vocab::PcaProjection::identity(dim));
    }
    return projections;
}

Pipeline build_pipeline(const synth::SynthConfig& cfg, bool supervised) {
    Pipeline p;
    p.world = synth::generate(cfg);
    p.projections = identity_projections(p.world.corpus);

    std::vector<data::Descriptor> parts;
    for (const auto& e : p.world.corpus.entities) {
        if (e.kind == data::EntityKind::Part) parts.push_back(e.descriptor);
    }
    p.vocabulary = vocab::kmeans_fit(parts, 30, {.seed = 7}, &p.kmeans_trace);

    p.supervised_graph = graph::build_graph(p.world.corpus, p.vocabulary, p.projections,
                                            {.supervised = supervised, .category_cap = 10, .seed = 7});
    const auto start = Clock::now();
    p.table = embed::train(p.supervised_graph, benchmark_gcn_config(cfg.dim));
    p.train_seconds = seconds_since(start);
    return p;
}

const Pipeline& shared_pipeline() {
    static const Pipeline p = [] {
        synth::SynthConfig cfg;  // defaults: 10x20, 30 words, dim 16, sigma 0.1
        cfg.seed = 7;
        return build_pipeline(cfg, /*supervised=*/true);
    }();
    return p;
}

eval::EvalReport run_eval(const graph::ShapeGraph& g, const Matrix& embeddings,
                          const std::map<std::string, std::string>& truth,
                          sim::QueryMode mode) {
    std::map<std::string, std::string> labels;
    for (std::size_t m : g.model_nodes()) {
        if (!g.nodes[m].label.empty()) labels[g.nodes[m].id] = g.nodes[m].label;
    }
    for (const auto& [id, label] : truth) labels[id] = label;

    const data::EntityKind want = mode == sim::QueryMode::Image ? data::EntityKind::RealImage
                                                                : data::EntityKind::Model;
    std::vector<eval::QueryRanking> rankings;
    for (const auto& [query_id, label] : truth) {
        const auto node = g.find(query_id);
        if (!node || g.nodes[*node].kind != want) continue;
        eval::QueryRanking qr;
        qr.query_id = query_id;
        for (const auto& cand : sim::retrieve(g, embeddings, query_id, mode, {}, 0).results) {
            qr.ranked.push_back(cand.id);
        }
        rankings.push_back(std::move(qr));
    }
    return eval::evaluate(rankings, labels);
}

// -------------------------------------------------------------- criteria --

// 1: analytic gradient vs central differences on small random graphs.
Outcome criterion_gradients() {
    const auto start = Clock::now();
    double worst = 0.0;
    int done = 0;
    for (std::uint64_t seed = 0; done < 10 && seed < 200; ++seed) {
        Rng rng(900 + seed);
        const std::size_t n = 6 + rng.below(15);  // <= 20 nodes
        Matrix x(n, 3);
        for (std::size_t i = 0; i < n * 3; ++i) x.data()[i] = rng.gaussian(0.0, 1.0);
        graph::ShapeGraph g;
        for (std::size_t i = 0; i < n; ++i) {
            data::Entity e;
            e.id = "n" + std::to_string(i);
            e.kind = data::EntityKind::Model;
            g.nodes.push_back(e);
        }
        for (std::uint32_t u = 0; u < n; ++u) {
            for (std::uint32_t v = u + 1; v < n; ++v) {
                if (rng.uniform01() < 0.3) g.edges.push_back({u, v, graph::EdgeKind::Lash});
            }
        }
        g.features = x;
        g.rebuild();

        embed::GcnConfig cfg;
        cfg.layer_dims = (done % 2 == 0) ? std::vector<std::size_t>{3, 2}
                                         : std::vector<std::size_t>{3, 4, 2};
        cfg.seed = seed;
        const auto result = embed::grad_check(g, cfg, 1e-5);
        if (cfg.layer_dims.size() > 2 && result.min_preactivation < 1e-3) {
            continue;  // ReLU kink exclusion: resample
        }
        worst = std::max(worst, result.max_rel_error);
        ++done;
    }
    const double elapsed = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "max relative error %.3e over %d graphs in %.1fs", worst,
                  done, elapsed);
    return {done == 10 && worst < 1e-4 && elapsed < 10.0, buf};
}

// 2: loss nonnegative, stable at extreme logits, and descending on the
// synthetic benchmark at b=1e-3.
Outcome criterion_loss() {
    Rng rng(41);
    for (int rep = 0; rep < 200; ++rep) {
        Matrix y(6, 4);
        for (std::size_t i = 0; i < 24; ++i) y.data()[i] = rng.gaussian(0.0, 2.0);
        std::vector<embed::PairSample> samples(1);
        samples[0].anchor = static_cast<std::uint32_t>(rng.below(6));
        samples[0].positives = {static_cast<std::uint32_t>(rng.below(6))};
        samples[0].negatives = {static_cast<std::uint32_t>(rng.below(6))};
        if (embed::pair_loss(y, samples) < 0.0) return {false, "negative loss on random input"};
    }
    Matrix big(2, 1);
    big(0, 0) = 100.0;
    big(1, 0) = 100.0;
    embed::PairSample pos;
    pos.anchor = 0;
    pos.positives = {1};
    embed::PairSample neg;
    neg.anchor = 0;
    neg.negatives = {1};
    if (!std::isfinite(embed::pair_loss(big, {pos})) ||
        !std::isfinite(embed::pair_loss(big, {neg}))) {
        return {false, "loss not finite at dot 1e4"};
    }
    big(1, 0) = -100.0;
    if (!std::isfinite(embed::pair_loss(big, {pos})) ||
        !std::isfinite(embed::pair_loss(big, {neg}))) {
        return {false, "loss not finite at dot -1e4"};
    }

    const Pipeline& p = shared_pipeline();
    const auto& losses = p.table.epoch_losses;
    std::size_t non_increasing = 0;
    for (std::size_t e = 1; e < losses.size(); ++e) {
        non_increasing += losses[e] <= losses[e - 1] ? 1 : 0;
    }
    const double frac = static_cast<double>(non_increasing) /
                        static_cast<double>(losses.size() - 1);
    const double ratio = losses.back() / losses.front();
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "non-increasing %.1f%%, final/initial %.3f, train %.1fs (300 epochs, b=1e-3)",
                  100.0 * frac, ratio, p.train_seconds);
    return {frac >= 0.9 && ratio < 0.5 && p.train_seconds < 60.0, buf};
}

// 3: Hungarian matching equals the exhaustive injection maximum.
Outcome criterion_matching() {
    const auto start = Clock::now();
    Rng rng(77);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t m = 1 + rng.below(7);
        const std::size_t n = 1 + rng.below(7);
        Matrix w(m, n);
        for (std::size_t i = 0; i < m * n; ++i) w.data()[i] = rng.uniform01();

        const bool rows_small = m <= n;
        const std::size_t small = rows_small ? m : n;
        const std::size_t large = rows_small ? n : m;
        std::vector<std::size_t> perm(large);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 0.0;
        do {
            double total = 0.0;
            for (std::size_t i = 0; i < small; ++i) {
                total += rows_small ? w(i, perm[i]) : w(perm[i], i);
            }
            best = std::max(best, total);
        } while (std::next_permutation(perm.begin(), perm.end()));

        worst = std::max(worst, std::abs(sim::max_weight_matching(w).total - best));
    }
    const double elapsed = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "max |hungarian - brute force| = %.2e in %.1fs", worst, elapsed);
    return {worst < 1e-12 && elapsed < 10.0, buf};
}

// 4: word-overlap score closed form.
Outcome criterion_words() {
    if (sim::sim_words({1, 2}, {3, 4}) != 0.0) return {false, "c=0 did not give 0"};
    double worst = 0.0;
    for (std::size_t c = 1; c <= 100; ++c) {
        std::vector<std::size_t> a(c), b(c);
        std::iota(a.begin(), a.end(), 0);
        std::iota(b.begin(), b.end(), 0);
        const double expect = static_cast<double>(c) / static_cast<double>(c + 1);
        worst = std::max(worst, std::abs(sim::sim_words(a, b) - expect));
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "max |S_G - c/(c+1)| = %.2e for c in 1..100", worst);
    return {worst < 1e-12, buf};
}

// 5: symmetric normalization and its degree eigenpair.
Outcome criterion_adjacency() {
    Rng rng(505);
    double worst_eig = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 2 + rng.below(40);
        graph::ShapeGraph g;
        for (std::size_t i = 0; i < n; ++i) {
            data::Entity e;
            e.id = "n" + std::to_string(i);
            e.kind = data::EntityKind::Model;
            g.nodes.push_back(e);
        }
        for (std::uint32_t u = 0; u < n; ++u) {
            for (std::uint32_t v = u + 1; v < n; ++v) {
                if (rng.uniform01() < 0.2) g.edges.push_back({u, v, graph::EdgeKind::Lash});
            }
        }
        g.features = Matrix(n, 1);
        g.rebuild();

        const Matrix s = g.norm_adj.dense();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (s(i, j) != s(j, i)) return {false, "asymmetric normalized adjacency"};
            }
        }
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::sqrt(static_cast<double>(g.degree(i) + 1));
        const auto y = g.norm_adj.multiply(x);
        for (std::size_t i = 0; i < n; ++i) worst_eig = std::max(worst_eig, std::abs(y[i] - x[i]));
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "symmetric exactly; max |S*sqrt(d) - sqrt(d)| = %.2e", worst_eig);
    return {worst_eig < 1e-9, buf};
}

// 6: k-means inertia monotone; centroids recover the latent prototypes.
Outcome criterion_kmeans() {
    Rng rng(606);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<data::Descriptor> pts;
        const std::size_t blobs = 2 + rng.below(4);
        for (std::size_t b = 0; b < blobs; ++b) {
            data::Descriptor center{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
            for (int i = 0; i < 25; ++i) {
                data::Descriptor p(3);
                for (std::size_t j = 0; j < 3; ++j) p[j] = rng.gaussian(center[j], 0.7);
                pts.push_back(p);
            }
        }
        vocab::KmeansTrace trace;
        vocab::kmeans_fit(pts, 2 + rng.below(5), {.seed = 606 + static_cast<std::uint64_t>(rep)},
                          &trace);
        for (std::size_t i = 1; i < trace.inertia_per_iter.size(); ++i) {
            if (trace.inertia_per_iter[i] > trace.inertia_per_iter[i - 1]) {
                return {false, "inertia increased during Lloyd iteration"};
            }
        }
    }

    const Pipeline& p = shared_pipeline();
    for (std::size_t i = 1; i < p.kmeans_trace.inertia_per_iter.size(); ++i) {
        if (p.kmeans_trace.inertia_per_iter[i] > p.kmeans_trace.inertia_per_iter[i - 1]) {
            return {false, "inertia increased on the benchmark vocabulary fit"};
        }
    }
    double worst = 0.0;
    for (std::size_t c = 0; c < p.vocabulary.k; ++c) {
        double best = 1e300;
        for (std::size_t w = 0; w < p.world.prototypes.rows(); ++w) {
            best = std::min(best, std::sqrt(kernels::dist2(p.vocabulary.centroids.row(c),
                                                           p.world.prototypes.row(w), 16)));
        }
        worst = std::max(worst, best);
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "inertia monotone on 20 datasets; max centroid-to-prototype distance %.3f", worst);
    return {worst < 0.5, buf};
}

// 7: end-to-end shape retrieval on the benchmark, plus the separable
// zero-noise variant.
Outcome criterion_shape_retrieval() {
    const auto start = Clock::now();
    const Pipeline& p = shared_pipeline();
    const auto report = run_eval(p.supervised_graph, p.table.embeddings, p.world.truth,
                                 sim::QueryMode::Shape);

    synth::SynthConfig clean;
    clean.seed = 7;
    clean.noise_sigma = 0.0;
    clean.disjoint_words = true;
    clean.words_per_class = 3;  // 10 disjoint 3-word sets exactly cover the 30 words
    const Pipeline zero = build_pipeline(clean, /*supervised=*/true);
    const auto zero_report = run_eval(zero.supervised_graph, zero.table.embeddings,
                                      zero.world.truth, sim::QueryMode::Shape);
    const double elapsed = seconds_since(start);

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "NN %.3f (>=0.90), mAP %.3f (>=0.80); zero-noise NN %.3f (=1.0); %.0fs", report.nn,
                  report.map, zero_report.nn, elapsed);
    return {report.nn >= 0.90 && report.map >= 0.80 && zero_report.nn == 1.0 && elapsed < 300.0,
            buf};
}

// 8: cross-modal retrieval, supervised vs unsupervised degradation.
Outcome criterion_cross_modal() {
    const Pipeline& p = shared_pipeline();
    const auto sup = run_eval(p.supervised_graph, p.table.embeddings, p.world.truth,
                              sim::QueryMode::Image);

    const graph::ShapeGraph unsup_graph =
        graph::build_graph(p.world.corpus, p.vocabulary, p.projections,
                           {.supervised = false, .category_cap = 10, .seed = 7});
    const embed::EmbeddingTable unsup_table = embed::train(unsup_graph, benchmark_gcn_config(16));
    const auto unsup = run_eval(unsup_graph, unsup_table.embeddings, p.world.truth,
                                sim::QueryMode::Image);

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "supervised NN %.3f (>=0.80); unsupervised NN %.3f (>= 0.85 * supervised)",
                  sup.nn, unsup.nn);
    return {sup.nn >= 0.80 && unsup.nn >= 0.85 * sup.nn, buf};
}

// 9: metric suite against hand-computed examples.
Outcome criterion_metrics() {
    auto make = [](const std::vector<char>& rel) {
        std::vector<eval::QueryRanking> rankings(1);
        rankings[0].query_id = "q";
        std::map<std::string, std::string> labels{{"q", "good"}};
        for (std::size_t i = 0; i < rel.size(); ++i) {
            const std::string id = "c" + std::to_string(i);
            rankings[0].ranked.push_back(id);
            labels[id] = rel[i] ? "good" : "bad";
        }
        return std::make_pair(rankings, labels);
    };

    const auto [perfect_r, perfect_l] = make({1, 1, 1, 0, 0, 0});
    const auto perfect = eval::evaluate(perfect_r, perfect_l);
    for (double v : {perfect.nn, perfect.ft, perfect.st, perfect.dcg, perfect.map}) {
        if (std::abs(v - 1.0) > 1e-6) return {false, "perfect ranking metric not 1"};
    }
    if (std::abs(perfect.anmrr) > 1e-6) return {false, "perfect ranking ANMRR not 0"};

    const auto [ap_r, ap_l] = make({1, 0, 1, 0});
    const auto ap = eval::evaluate(ap_r, ap_l);
    if (std::abs(ap.map - (1.0 + 2.0 / 3.0) / 2.0) > 1e-6) {
        return {false, "AP example disagrees with hand value 0.8333"};
    }

    const auto [inv_r, inv_l] = make({0, 0, 0, 0, 0, 0, 0, 0, 1, 1});
    const auto inv = eval::evaluate(inv_r, inv_l);
    if (inv.nn != 0.0) return {false, "inverted ranking NN not 0"};
    if (std::abs(inv.anmrr - 1.0) > 1e-6) {
        return {false, "inverted 2-of-10 ANMRR differs from MPEG-7 hand value 1.0"};
    }
    return {true, "perfect/AP/ANMRR hand examples reproduced to 1e-6"};
}

// 10: the full CLI pipeline is byte-deterministic at a fixed seed.
Outcome criterion_determinism(const std::string& cli_arg) {
    if (cli_arg.empty()) return {false, "no --cli path given"};
    const std::string cli = fs::absolute(cli_arg).string();  // survives the cd below
    if (!fs::exists(cli)) return {false, "cli binary not found: " + cli};
    const fs::path root = fs::temp_directory_path() / "gwkg_acceptance_det";
    std::error_code ec;
    fs::remove_all(root, ec);

    auto run_pipeline = [&](const fs::path& dir) -> bool {
        fs::create_directories(dir);
        auto sh = [&](const std::string& args) {
            const std::string cmd = "cd " + dir.string() + " && " + cli + " " + args +
                                    " >/dev/null 2>&1";
            return std::system(cmd.c_str()) == 0;
        };
        return sh("synth --out world --classes 4 --shapes 5 --views 2 --parts 3 --images 2"
                  " --true-words 12 --seed 7") &&
               sh("vocab --manifest world/world.jsonl --out vocab.json --k 12 --seed 7") &&
               sh("graph --manifest world/world.jsonl --vocab vocab.json --out graph.json --seed 7") &&
               sh("train --graph graph.json --out emb --layers 32 --embed-dim 16 --epochs 60"
                  " --seed 7") &&
               sh("retrieve --graph graph.json --emb emb --query c00s000 --mode shape"
                  " --out retrieval.json") &&
               sh("eval --graph graph.json --emb emb --truth world/truth.json --out eval.json"
                  " --pr-csv pr.csv");
    };

    if (!run_pipeline(root / "a") || !run_pipeline(root / "b")) {
        return {false, "CLI pipeline failed (see " + root.string() + ")"};
    }
    const std::vector<std::string> artifacts{
        "world/world.jsonl", "world/world.gwkg", "world/truth.json", "vocab.json",
        "graph.json",        "graph.gwkg",       "emb.json",         "emb.gwkg",
        "emb.loss.csv",      "retrieval.json",   "eval.json",        "pr.csv"};
    for (const auto& name : artifacts) {
        if (read_file(root / "a" / name) != read_file(root / "b" / name)) {
            return {false, "artifact differs between runs: " + name};
        }
    }
    fs::remove_all(root, ec);
    return {true, std::to_string(artifacts.size()) + " artifacts byte-identical across two runs"};
}

} // namespace

int main(int argc, char** argv) {
    std::string cli;
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) {
            cli = argv[++i];
        } else {
            wanted.insert(std::atoi(arg.c_str()));
        }
    }

    struct Criterion {
        int number;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "gradient correctness", criterion_gradients},
        {2, "loss soundness", criterion_loss},
        {3, "matching oracle", criterion_matching},
        {4, "word-score closed form", criterion_words},
        {5, "normalized adjacency", criterion_adjacency},
        {6, "k-means", criterion_kmeans},
        {7, "end-to-end shape retrieval", criterion_shape_retrieval},
        {8, "cross-modal retrieval", criterion_cross_modal},
        {9, "metric suite", criterion_metrics},
        {10, "determinism", [&] { return criterion_determinism(cli); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.number)) continue;
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] criterion %2d: %s - %s\n", outcome.pass ? "PASS" : "FAIL", c.number,
                    c.name, outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
