#pragma once
// Retrieval evaluation: nearest neighbor, first/second tier, F-measure,
// normalized DCG, MPEG-7 ANMRR, average precision / mAP, area under the
// interpolated precision-recall curve, and PR curves.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace gwkg::eval {

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // one per rank
    // False when the list ends before every relevant item was retrieved.
    bool reached_full_recall = true;
};

// relevance[k] marks rank k+1; total_relevant counts the relevant items in
// the whole candidate set (must be >= 1).
PrCurve pr_curve(const std::vector<char>& relevance, std::size_t total_relevant);

struct QueryMetrics {
    std::string query_id;
    double nn = 0.0;
    double ft = 0.0;
    double st = 0.0;
    double f_measure = 0.0;
    double dcg = 0.0;
    double anmrr = 0.0;
    double ap = 0.0;
    double auc = 0.0;
    PrCurve pr;
};

struct EvalReport {
    std::vector<QueryMetrics> per_query;
    double nn = 0.0, ft = 0.0, st = 0.0, f_measure = 0.0, dcg = 0.0, anmrr = 0.0, map = 0.0,
           auc = 0.0;                 // macro averages
    std::vector<PrPoint> macro_pr;    // interpolated precision at 101 recall levels
    std::size_t f_cutoff = 20;
};

struct QueryRanking {
    std::string query_id;
    std::vector<std::string> ranked;  // candidate ids, best first, query excluded
};

// labels maps every query and candidate id to its class. Throws when a
// ranked list contains its own query or a query has no relevant candidate.
EvalReport evaluate(const std::vector<QueryRanking>& rankings,
                    const std::map<std::string, std::string>& labels, std::size_t f_cutoff = 20);

std::string report_to_json(const EvalReport& report);
std::string pr_curves_to_csv(const EvalReport& report);

} // namespace gwkg::eval
