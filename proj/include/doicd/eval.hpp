#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doicd/mask.hpp"

namespace doicd {

struct EvalCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    EvalCounts& operator+=(const EvalCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    bool operator==(const EvalCounts&) const = default;
};

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
};

EvalCounts count_pixels(const BinaryMask& pred, const BinaryMask& gt);

/// Precision, recall and their harmonic mean over pixel counts.
///
/// Zero-denominator conventions:
///   pred and gt both empty      -> P = R = F = 1
///   no predicted pixels, gt set -> P = 0
///   no gt pixels, pred set      -> R = 0
///   P + R == 0                  -> F = 0
Scores score(const EvalCounts& counts);

struct ScoreRow {
    std::string pair_id;
    std::string dataset_id;
    Scores scores;
    EvalCounts counts;
};

ScoreRow score_pair(std::string pair_id, std::string dataset_id, const BinaryMask& pred, const BinaryMask& gt);

struct GroupSummary {
    double mean_f = 0.0;
    double mean_p = 0.0;
    double mean_r = 0.0;
    std::size_t n = 0;
};

struct EvalReport {
    std::map<std::string, GroupSummary> datasets;
    /// Mean over datasets of the per-dataset means.
    GroupSummary overall;
    /// Mean over all images, ignoring dataset grouping.
    GroupSummary per_image;
};

/// Per-dataset means of per-image scores, then the mean of those means.
/// Throws std::invalid_argument on empty input.
EvalReport aggregate(const std::vector<ScoreRow>& rows);

nlohmann::ordered_json to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

struct PairDelta {
    std::string pair_id;
    std::string dataset_id;
    double base_f = 0.0;
    double fused_f = 0.0;
    double delta = 0.0;
};

struct CompareReport {
    std::vector<PairDelta> pairs;                    // in base_rows order
    std::map<std::string, double> dataset_delta;     // mean fused F - mean base F
    double overall_delta = 0.0;                      // on mean-of-dataset-means
    std::size_t wins = 0;
    std::size_t losses = 0;
    std::size_t ties = 0;
};

/// Per-pair and per-dataset F-score changes from `base_rows` to `fused_rows`.
/// Both sets must cover the same pair ids.
CompareReport compare(const std::vector<ScoreRow>& base_rows, const std::vector<ScoreRow>& fused_rows,
                      double tie_tolerance = 1e-12);

nlohmann::ordered_json to_json(const CompareReport& report);
std::string format_table(const CompareReport& report);

}  // namespace doicd
