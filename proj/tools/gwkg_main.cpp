// gwkg: geometric-word knowledge-graph retrieval pipeline.
//
// Subcommands: synth, vocab, graph, train, retrieve, eval. Every stage reads
// its inputs from disk, writes outputs atomically, and drops a `.run.json`
// manifest with the effective parameters and input digests so a run can be
// reproduced byte-for-byte from the same seed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwkg/datamodel.hpp"
#include "gwkg/gcn.hpp"
#include "gwkg/io_util.hpp"
#include "gwkg/kgraph.hpp"
#include "gwkg/kmeans.hpp"
#include "gwkg/metrics.hpp"
#include "gwkg/pca.hpp"
#include "gwkg/rng.hpp"
#include "gwkg/similarity.hpp"
#include "gwkg/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gwkg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void write_run_manifest(const fs::path& path, const std::string& command, json parameters,
                        const std::vector<fs::path>& inputs) {
    json m;
    m["command"] = command;
    m["parameters"] = std::move(parameters);
    json in = json::object();
    for (const fs::path& p : inputs) in[p.string()] = file_digest(p);
    m["inputs"] = std::move(in);
    atomic_write_file(path, m.dump(2));
}

fs::path with_suffix(fs::path p, const char* suffix) {
    p.replace_extension(suffix);
    return p;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    synth::SynthConfig cfg;
    std::string out_dir;
};

int run_synth(const SynthArgs& a) {
    const synth::SynthWorld world = synth::generate(a.cfg);
    synth::write_world(world, a.out_dir);
    json params{{"classes", a.cfg.classes},
                {"shapes_per_class", a.cfg.shapes_per_class},
                {"true_words", a.cfg.true_words},
                {"words_per_class", a.cfg.words_per_class},
                {"views_per_shape", a.cfg.views_per_shape},
                {"parts_per_view", a.cfg.parts_per_view},
                {"images_per_class", a.cfg.images_per_class},
                {"dim", a.cfg.dim},
                {"noise_sigma", a.cfg.noise_sigma},
                {"prototype_separation", a.cfg.prototype_separation},
                {"disjoint_words", a.cfg.disjoint_words},
                {"seed", a.cfg.seed}};
    write_run_manifest(fs::path(a.out_dir) / "synth.run.json", "synth", std::move(params), {});
    const auto stats = data::corpus_stats(world.corpus);
    std::cout << "wrote " << a.out_dir << "/world.jsonl (" << world.corpus.size()
              << " entities), truth (" << world.truth.size() << " queries)\n"
              << data::stats_to_json(stats) << "\n";
    return kExitOk;
}

// ---- vocab ----------------------------------------------------------------

struct VocabArgs {
    std::string manifest;
    std::string sidecar;
    std::string out = "vocab.json";
    std::size_t k = 64;
    std::size_t dim = 0;  // 0: min(128, smallest modality dim)
    std::uint64_t seed = 7;
};

int run_vocab(const VocabArgs& a) {
    const auto sidecar = a.sidecar.empty() ? std::nullopt
                                           : std::make_optional<fs::path>(a.sidecar);
    const data::Corpus corpus = data::load_manifest(a.manifest, sidecar);
    const vocab::ProjectionSet projections = vocab::fit_projection_set(corpus, a.dim);

    std::vector<data::Descriptor> parts;
    for (const auto& e : corpus.entities) {
        if (e.kind == data::EntityKind::Part) {
            parts.push_back(vocab::apply_pca(projections.at(data::EntityKind::Part), e.descriptor));
        }
    }
    if (parts.empty()) throw Error("vocab: manifest has no part entities to cluster");

    const vocab::Vocabulary voc = vocab::kmeans_fit(parts, a.k, {.seed = a.seed});
    vocab::save_vocabulary(a.out, voc, projections);

    json params{{"k", a.k}, {"dim", voc.dim()}, {"seed", a.seed}};
    write_run_manifest(with_suffix(a.out, ".run.json"), "vocab", std::move(params),
                       {a.manifest});
    std::cout << "wrote " << a.out << " (k=" << voc.k << ", dim=" << voc.dim()
              << ", inertia=" << voc.inertia << ")\n";
    return kExitOk;
}

// ---- graph ----------------------------------------------------------------

struct GraphArgs {
    std::string manifest;
    std::string sidecar;
    std::string vocab_path;
    std::string out = "graph.json";
    bool supervised = true;
    int category_cap = 10;
    std::uint64_t seed = 7;
};

int run_graph(const GraphArgs& a) {
    const auto sidecar = a.sidecar.empty() ? std::nullopt
                                           : std::make_optional<fs::path>(a.sidecar);
    const data::Corpus corpus = data::load_manifest(a.manifest, sidecar);
    const auto [voc, projections] = vocab::load_vocabulary(a.vocab_path);

    const graph::ShapeGraph g = graph::build_graph(
        corpus, voc, projections,
        {.supervised = a.supervised, .category_cap = a.category_cap, .seed = a.seed});
    graph::save_graph(g, a.out, file_digest(a.vocab_path));

    json params{{"supervised", a.supervised},
                {"category_cap", a.category_cap},
                {"seed", a.seed}};
    write_run_manifest(with_suffix(a.out, ".run.json"), "graph", std::move(params),
                       {a.manifest, a.vocab_path});
    std::cout << "wrote " << a.out << " (N=" << g.size() << ", E=" << g.edges.size() << ")\n";
    return kExitOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string graph_path;
    std::string out = "emb";
    std::vector<std::size_t> hidden{128};
    std::size_t embed_dim = 64;
    double lr = 0.01;
    std::size_t epochs = 300;
    std::size_t neg_ratio = 5;
    std::uint64_t seed = 7;
    bool freeze_negatives = false;
    double tol = 0.0;  // 0 disables early stop
};

int run_train(const TrainArgs& a) {
    const graph::ShapeGraph g = graph::load_graph(a.graph_path);

    embed::GcnConfig cfg;
    cfg.layer_dims.push_back(g.features.cols());
    for (std::size_t h : a.hidden) cfg.layer_dims.push_back(h);
    cfg.layer_dims.push_back(a.embed_dim);
    cfg.learning_rate = a.lr;
    cfg.epochs = a.epochs;
    cfg.neg_ratio = a.neg_ratio;
    cfg.seed = a.seed;
    cfg.freeze_negatives = a.freeze_negatives;
    if (a.tol > 0.0) cfg.tol = a.tol;

    const embed::EmbeddingTable table = embed::train(g, cfg);
    embed::save_table(table, a.out);

    json params{{"layer_dims", cfg.layer_dims},
                {"lr", a.lr},
                {"epochs", a.epochs},
                {"neg_ratio", a.neg_ratio},
                {"freeze_negatives", a.freeze_negatives},
                {"seed", a.seed}};
    write_run_manifest(with_suffix(a.out, ".run.json"), "train", std::move(params),
                       {a.graph_path});
    std::cout << "wrote " << a.out << ".{json,gwkg,loss.csv}";
    if (!table.epoch_losses.empty()) {
        std::cout << " (loss " << table.epoch_losses.front() << " -> "
                  << table.epoch_losses.back() << " over " << table.epoch_losses.size()
                  << " epochs)";
    }
    std::cout << "\n";
    return kExitOk;
}

// ---- retrieve / eval --------------------------------------------------------

sim::ChannelWeights parse_weights(const std::vector<double>& values, sim::QueryMode mode) {
    sim::ChannelWeights w;
    if (values.empty()) return w;
    if (mode == sim::QueryMode::Image) {
        if (values.size() != 3) {
            throw Error("image mode expects --weights beta*,gamma*,lambda* (3 values)");
        }
        w.beta_star = values[0];
        w.gamma_star = values[1];
        w.lambda_star = values[2];
    } else {
        if (values.size() != 4) {
            throw Error("shape/parts mode expects --weights alpha,beta,gamma,lambda (4 values)");
        }
        w.alpha = values[0];
        w.beta = values[1];
        w.gamma = values[2];
        w.lambda = values[3];
    }
    return w;
}

sim::QueryMode parse_mode(const std::string& mode) {
    if (mode == "shape") return sim::QueryMode::Shape;
    if (mode == "image") return sim::QueryMode::Image;
    if (mode == "parts") return sim::QueryMode::Parts;
    throw Error("unknown mode '" + mode + "'");
}

struct RetrieveArgs {
    std::string graph_path;
    std::string emb_path;
    std::string query;
    std::string query_manifest;  // external query subtree to attach
    std::string vocab_path;      // needed for attachment
    std::string mode = "shape";
    std::vector<double> weights;
    std::size_t top = 10;
    std::string out;  // empty: stdout
};

int run_retrieve(const RetrieveArgs& a) {
    const graph::ShapeGraph g = graph::load_graph(a.graph_path);
    const embed::EmbeddingTable table = embed::load_table(a.emb_path);
    const sim::QueryMode mode = parse_mode(a.mode);
    const sim::ChannelWeights w = parse_weights(a.weights, mode);
    if (a.query.empty() && a.query_manifest.empty()) {
        throw Error("retrieve needs --query (in-graph id) or --query-manifest");
    }

    sim::RetrievalResult result;
    if (a.query_manifest.empty()) {
        result = sim::retrieve(g, table.embeddings, a.query, mode, w, a.top);
    } else {
        // Out-of-corpus query: attach the subtree, embed it inductively with
        // the frozen trained weights, then rank against the base models.
        if (a.vocab_path.empty()) throw Error("--query-manifest requires --vocab");
        const auto [voc, projections] = vocab::load_vocabulary(a.vocab_path);
        const data::Corpus query_corpus = data::load_manifest(a.query_manifest);
        const auto [augmented, new_ids] =
            graph::attach_query(g, query_corpus.entities, voc, projections);
        const Matrix y = embed::embed_query(augmented, table);
        std::string query_id = a.query;
        if (query_id.empty()) {
            for (const auto& e : query_corpus.entities) {
                if (e.parent.empty()) query_id = e.id;
            }
        }
        result = sim::retrieve(augmented, y, query_id, mode, w, a.top);
    }
    const std::string payload = sim::retrieval_to_json(result);
    if (a.out.empty()) {
        std::cout << payload << "\n";
    } else {
        atomic_write_file(a.out, payload);
        json params{{"query", a.query}, {"mode", a.mode}, {"top", a.top}};
        write_run_manifest(with_suffix(a.out, ".run.json"), "retrieve", std::move(params),
                           {a.graph_path, with_suffix(a.emb_path, ".json")});
        std::cout << "wrote " << a.out << "\n";
    }
    return kExitOk;
}

struct EvalArgs {
    std::string graph_path;
    std::string emb_path;
    std::string truth_path;
    std::string mode = "shape";
    std::vector<double> weights;
    std::size_t f_cutoff = 20;
    std::string out = "eval.json";
    std::string pr_csv;
};

int run_eval(const EvalArgs& a) {
    const graph::ShapeGraph g = graph::load_graph(a.graph_path);
    const embed::EmbeddingTable table = embed::load_table(a.emb_path);
    const auto truth = synth::load_truth(a.truth_path);
    const sim::QueryMode mode = parse_mode(a.mode);
    if (mode == sim::QueryMode::Parts) throw Error("eval supports shape and image modes");
    const sim::ChannelWeights w = parse_weights(a.weights, mode);

    // Candidate labels come from the graph's model nodes; query labels from
    // the truth file.
    std::map<std::string, std::string> labels;
    for (std::size_t m : g.model_nodes()) {
        if (!g.nodes[m].label.empty()) labels[g.nodes[m].id] = g.nodes[m].label;
    }
    for (const auto& [id, label] : truth) labels[id] = label;

    const data::EntityKind want_kind = mode == sim::QueryMode::Image
                                           ? data::EntityKind::RealImage
                                           : data::EntityKind::Model;
    std::vector<eval::QueryRanking> rankings;
    for (const auto& [query_id, label] : truth) {
        const auto node = g.find(query_id);
        if (!node) throw Error("truth query '" + query_id + "' is not in the graph");
        if (g.nodes[*node].kind != want_kind) continue;
        eval::QueryRanking qr;
        qr.query_id = query_id;
        const auto result = sim::retrieve(g, table.embeddings, query_id, mode, w, 0);
        qr.ranked.reserve(result.results.size());
        for (const auto& cand : result.results) qr.ranked.push_back(cand.id);
        rankings.push_back(std::move(qr));
    }
    if (rankings.empty()) throw Error("no queries of the requested mode in the truth file");

    const eval::EvalReport report = eval::evaluate(rankings, labels, a.f_cutoff);
    atomic_write_file(a.out, eval::report_to_json(report));
    if (!a.pr_csv.empty()) atomic_write_file(a.pr_csv, eval::pr_curves_to_csv(report));

    json params{{"mode", a.mode}, {"f_cutoff", a.f_cutoff}, {"queries", rankings.size()}};
    write_run_manifest(with_suffix(a.out, ".run.json"), "eval", std::move(params),
                       {a.graph_path, with_suffix(a.emb_path, ".json"), a.truth_path});
    std::printf("wrote %s: NN=%.4f FT=%.4f ST=%.4f F=%.4f DCG=%.4f ANMRR=%.4f mAP=%.4f AUC=%.4f\n",
                a.out.c_str(), report.nn, report.ft, report.st, report.f_measure, report.dcg,
                report.anmrr, report.map, report.auc);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"geometric-word knowledge-graph shape retrieval"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic benchmark world");
    synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth_cmd->add_option("--classes", synth_args.cfg.classes)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--shapes", synth_args.cfg.shapes_per_class)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--true-words", synth_args.cfg.true_words)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--words-per-class", synth_args.cfg.words_per_class)
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--views", synth_args.cfg.views_per_shape)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--parts", synth_args.cfg.parts_per_view)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--images", synth_args.cfg.images_per_class,
                          "real-image queries per class (0 disables)");
    synth_cmd->add_option("--dim", synth_args.cfg.dim)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise", synth_args.cfg.noise_sigma)->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--separation", synth_args.cfg.prototype_separation)
        ->check(CLI::PositiveNumber);
    synth_cmd->add_flag("--disjoint-words", synth_args.cfg.disjoint_words,
                        "partition words across classes (zero overlap)");
    synth_cmd->add_option("--seed", synth_args.cfg.seed);

    VocabArgs vocab_args;
    auto* vocab_cmd =
        app.add_subcommand("vocab", "fit PCA projections and the geometric-word vocabulary");
    vocab_cmd->add_option("--manifest", vocab_args.manifest)->required()->check(CLI::ExistingFile);
    vocab_cmd->add_option("--sidecar", vocab_args.sidecar)->check(CLI::ExistingFile);
    vocab_cmd->add_option("--out", vocab_args.out);
    vocab_cmd->add_option("--k", vocab_args.k, "vocabulary size")->check(CLI::PositiveNumber);
    vocab_cmd->add_option("--dim", vocab_args.dim,
                          "common descriptor dim after PCA (0: min(128, smallest))");
    vocab_cmd->add_option("--seed", vocab_args.seed);

    GraphArgs graph_args;
    auto* graph_cmd = app.add_subcommand("graph", "build the shape knowledge graph");
    graph_cmd->add_option("--manifest", graph_args.manifest)->required()->check(CLI::ExistingFile);
    graph_cmd->add_option("--sidecar", graph_args.sidecar)->check(CLI::ExistingFile);
    graph_cmd->add_option("--vocab", graph_args.vocab_path)->required()->check(CLI::ExistingFile);
    graph_cmd->add_option("--out", graph_args.out);
    graph_cmd->add_flag("--supervised,!--unsupervised", graph_args.supervised,
                        "category edges on/off");
    graph_cmd->add_option("--category-cap", graph_args.category_cap,
                          "same-label partners sampled per node (<=0: full clique)");
    graph_cmd->add_option("--seed", graph_args.seed);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train entity embeddings");
    train_cmd->add_option("--graph", train_args.graph_path)->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_args.out, "output basename");
    train_cmd->add_option("--layers", train_args.hidden, "hidden layer dims")->delimiter(',');
    train_cmd->add_option("--embed-dim", train_args.embed_dim)->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train_args.lr)->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", train_args.epochs);
    train_cmd->add_option("--neg-ratio", train_args.neg_ratio)->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train_args.seed);
    train_cmd->add_flag("--freeze-negatives", train_args.freeze_negatives,
                        "sample negatives once instead of per epoch");
    train_cmd->add_option("--tol", train_args.tol, "early stop on loss delta (0 disables)");

    RetrieveArgs retrieve_args;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "rank candidates for one query");
    retrieve_cmd->add_option("--graph", retrieve_args.graph_path)
        ->required()
        ->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--emb", retrieve_args.emb_path)->required();
    retrieve_cmd->add_option("--query", retrieve_args.query, "in-graph query id");
    retrieve_cmd->add_option("--query-manifest", retrieve_args.query_manifest,
                             "manifest holding an external query subtree to attach")
        ->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--vocab", retrieve_args.vocab_path,
                             "vocabulary (required with --query-manifest)")
        ->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--mode", retrieve_args.mode)
        ->check(CLI::IsMember({"shape", "image", "parts"}));
    retrieve_cmd->add_option("--weights", retrieve_args.weights, "channel weights")->delimiter(',');
    retrieve_cmd->add_option("--top", retrieve_args.top, "result count (0: all)");
    retrieve_cmd->add_option("--out", retrieve_args.out, "output file (default stdout)");

    EvalArgs eval_args;
    auto* eval_cmd =
        app.add_subcommand("eval", "run retrieval for every truth query and score it");
    eval_cmd->add_option("--graph", eval_args.graph_path)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--emb", eval_args.emb_path)->required();
    eval_cmd->add_option("--truth", eval_args.truth_path)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"shape", "image"}));
    eval_cmd->add_option("--weights", eval_args.weights)->delimiter(',');
    eval_cmd->add_option("--f-cutoff", eval_args.f_cutoff)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out", eval_args.out);
    eval_cmd->add_option("--pr-csv", eval_args.pr_csv, "per-query PR curve CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(synth_args);
        if (vocab_cmd->parsed()) return run_vocab(vocab_args);
        if (graph_cmd->parsed()) return run_graph(graph_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (retrieve_cmd->parsed()) return run_retrieve(retrieve_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
