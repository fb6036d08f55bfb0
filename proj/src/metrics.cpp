#include "gwkg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "gwkg/io_util.hpp"

namespace gwkg::eval {

using nlohmann::json;

PrCurve pr_curve(const std::vector<char>& relevance, std::size_t total_relevant) {
    if (total_relevant == 0) throw Error("pr_curve: no relevant candidates for this query");
    PrCurve curve;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < relevance.size(); ++k) {
        if (relevance[k]) ++hits;
        curve.points.push_back({static_cast<double>(hits) / static_cast<double>(total_relevant),
                                static_cast<double>(hits) / static_cast<double>(k + 1)});
    }
    curve.reached_full_recall = hits >= total_relevant;
    return curve;
}

namespace {

struct PerQueryInput {
    std::vector<char> relevance;
    std::size_t relevant_total = 0;
};

QueryMetrics score_query(const std::string& query_id, const PerQueryInput& in,
                         std::size_t f_cutoff, std::size_t max_class_size) {
    const std::size_t len = in.relevance.size();
    const std::size_t r_total = in.relevant_total;
    QueryMetrics qm;
    qm.query_id = query_id;

    std::vector<std::size_t> hits_at(len + 1, 0);
    for (std::size_t k = 0; k < len; ++k) hits_at[k + 1] = hits_at[k] + (in.relevance[k] ? 1 : 0);

    qm.nn = in.relevance.empty() ? 0.0 : (in.relevance[0] ? 1.0 : 0.0);

    const double r = static_cast<double>(r_total);
    qm.ft = static_cast<double>(hits_at[std::min(len, r_total)]) / r;
    qm.st = static_cast<double>(hits_at[std::min(len, 2 * r_total)]) / r;

    const std::size_t cutoff = std::min(len, f_cutoff);
    if (cutoff > 0) {
        const double precision = static_cast<double>(hits_at[cutoff]) / static_cast<double>(cutoff);
        const double recall = static_cast<double>(hits_at[cutoff]) / r;
        qm.f_measure = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }

    double dcg = 0.0;
    double idcg = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
        if (in.relevance[k]) dcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
        if (k < r_total) idcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
    }
    qm.dcg = idcg > 0.0 ? dcg / idcg : 0.0;

    // MPEG-7 normalized modified retrieval rank. Relevant items ranked
    // beyond K are penalized with the constant 1.25 * K.
    const std::size_t k_window = std::min(4 * r_total, 2 * max_class_size);
    double avr = 0.0;
    std::size_t found = 0;
    for (std::size_t k = 0; k < len; ++k) {
        if (!in.relevance[k]) continue;
        const std::size_t rank = k + 1;
        avr += rank <= k_window ? static_cast<double>(rank) : 1.25 * static_cast<double>(k_window);
        ++found;
    }
    avr += static_cast<double>(r_total - found) * 1.25 * static_cast<double>(k_window);
    avr /= r;
    const double mrr = avr - 0.5 * (1.0 + r);
    const double denom = 1.25 * static_cast<double>(k_window) - 0.5 * (1.0 + r);
    qm.anmrr = denom > 0.0 ? std::clamp(mrr / denom, 0.0, 1.0) : 0.0;

    qm.pr = pr_curve(in.relevance, r_total);

    double ap = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
        if (in.relevance[k]) ap += qm.pr.points[k].precision;
    }
    qm.ap = ap / r;

    // Area under the interpolated curve: precision is replaced by the best
    // precision at any equal-or-higher recall, integrated over recall steps.
    std::vector<double> suffix_max(len + 1, 0.0);
    for (std::size_t k = len; k-- > 0;) {
        suffix_max[k] = std::max(suffix_max[k + 1], qm.pr.points[k].precision);
    }
    double auc = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
        if (in.relevance[k]) auc += suffix_max[k] / r;
    }
    qm.auc = auc;
    return qm;
}

} // namespace

EvalReport evaluate(const std::vector<QueryRanking>& rankings,
                    const std::map<std::string, std::string>& labels, std::size_t f_cutoff) {
    if (rankings.empty()) throw Error("evaluate: no queries");
    EvalReport report;
    report.f_cutoff = f_cutoff;

    std::vector<PerQueryInput> inputs;
    inputs.reserve(rankings.size());
    std::size_t max_class_size = 0;
    for (const QueryRanking& q : rankings) {
        auto query_label = labels.find(q.query_id);
        if (query_label == labels.end()) throw Error("evaluate: no label for query '" + q.query_id + "'");
        PerQueryInput in;
        in.relevance.reserve(q.ranked.size());
        for (const std::string& cand : q.ranked) {
            if (cand == q.query_id) {
                throw Error("evaluate: ranked list for '" + q.query_id + "' contains the query itself");
            }
            auto cand_label = labels.find(cand);
            if (cand_label == labels.end()) {
                throw Error("evaluate: no label for candidate '" + cand + "'");
            }
            const bool rel = cand_label->second == query_label->second;
            in.relevance.push_back(rel ? 1 : 0);
            if (rel) ++in.relevant_total;
        }
        if (in.relevant_total == 0) {
            throw Error("evaluate: query '" + q.query_id + "' has no relevant candidate");
        }
        max_class_size = std::max(max_class_size, in.relevant_total);
        inputs.push_back(std::move(in));
    }

    for (std::size_t qi = 0; qi < rankings.size(); ++qi) {
        report.per_query.push_back(
            score_query(rankings[qi].query_id, inputs[qi], f_cutoff, max_class_size));
    }

    // Sum first, divide once: a perfect run must average to exactly 1.0.
    const double n = static_cast<double>(report.per_query.size());
    for (const QueryMetrics& qm : report.per_query) {
        report.nn += qm.nn;
        report.ft += qm.ft;
        report.st += qm.st;
        report.f_measure += qm.f_measure;
        report.dcg += qm.dcg;
        report.anmrr += qm.anmrr;
        report.map += qm.ap;
        report.auc += qm.auc;
    }
    for (double* metric : {&report.nn, &report.ft, &report.st, &report.f_measure, &report.dcg,
                           &report.anmrr, &report.map, &report.auc}) {
        *metric /= n;
    }

    report.macro_pr.resize(101);
    for (std::size_t level = 0; level <= 100; ++level) {
        const double r = static_cast<double>(level) / 100.0;
        double acc = 0.0;
        for (const QueryMetrics& qm : report.per_query) {
            double best = 0.0;
            for (const PrPoint& p : qm.pr.points) {
                if (p.recall + 1e-12 >= r) best = std::max(best, p.precision);
            }
            acc += best;
        }
        report.macro_pr[level] = {r, acc / n};
    }
    return report;
}

std::string report_to_json(const EvalReport& report) {
    json obj;
    obj["macro"] = {{"nn", report.nn},       {"ft", report.ft},
                    {"st", report.st},       {"f_measure", report.f_measure},
                    {"dcg", report.dcg},     {"anmrr", report.anmrr},
                    {"map", report.map},     {"auc", report.auc}};
    obj["f_cutoff"] = report.f_cutoff;
    json per_query = json::array();
    for (const QueryMetrics& qm : report.per_query) {
        per_query.push_back({{"query", qm.query_id},
                             {"nn", qm.nn},
                             {"ft", qm.ft},
                             {"st", qm.st},
                             {"f_measure", qm.f_measure},
                             {"dcg", qm.dcg},
                             {"anmrr", qm.anmrr},
                             {"ap", qm.ap},
                             {"auc", qm.auc},
                             {"full_recall", qm.pr.reached_full_recall}});
    }
    obj["per_query"] = std::move(per_query);
    json pr = json::array();
    for (const PrPoint& p : report.macro_pr) pr.push_back(json::array({p.recall, p.precision}));
    obj["macro_pr"] = std::move(pr);
    return obj.dump(2);
}

std::string pr_curves_to_csv(const EvalReport& report) {
    std::string out = "query,rank,recall,precision\n";
    char buf[160];
    for (const QueryMetrics& qm : report.per_query) {
        for (std::size_t k = 0; k < qm.pr.points.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g,%.17g\n", qm.query_id.c_str(), k + 1,
                          qm.pr.points[k].recall, qm.pr.points[k].precision);
            out += buf;
        }
    }
    return out;
}

} // namespace gwkg::eval
