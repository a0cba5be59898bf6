#include "doicd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace doicd {

EvalCounts count_pixels(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_extent(pred.extent(), gt.extent(), "count_pixels");
    // Index a 4-bin histogram by (pred << 1 | gt).
    std::uint64_t bins[4] = {0, 0, 0, 0};
    auto p = pred.data();
    auto g = gt.data();
    for (std::size_t i = 0; i < p.size(); ++i)
        ++bins[(p[i] << 1) | g[i]];
    return {.tp = bins[3], .fp = bins[2], .fn = bins[1], .tn = bins[0]};
}

Scores score(const EvalCounts& c) {
    const auto pred_pos = c.tp + c.fp;
    const auto gt_pos = c.tp + c.fn;
    if (pred_pos == 0 && gt_pos == 0)
        return {1.0, 1.0, 1.0};
    Scores s;
    s.precision = pred_pos == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(pred_pos);
    s.recall = gt_pos == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(gt_pos);
    const double sum = s.precision + s.recall;
    s.fscore = sum == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / sum;
    return s;
}

ScoreRow score_pair(std::string pair_id, std::string dataset_id, const BinaryMask& pred, const BinaryMask& gt) {
    ScoreRow row;
    row.pair_id = std::move(pair_id);
    row.dataset_id = std::move(dataset_id);
    row.counts = count_pixels(pred, gt);
    row.scores = score(row.counts);
    return row;
}

namespace {

// Sums in sorted order so the result does not depend on row order.
double sorted_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v)
        sum += x;
    return sum / static_cast<double>(v.size());
}

struct Columns {
    std::vector<double> f, p, r;

    void add(const Scores& s) {
        f.push_back(s.fscore);
        p.push_back(s.precision);
        r.push_back(s.recall);
    }
    GroupSummary summary() const { return {sorted_mean(f), sorted_mean(p), sorted_mean(r), f.size()}; }
};

}  // namespace

EvalReport aggregate(const std::vector<ScoreRow>& rows) {
    if (rows.empty())
        throw std::invalid_argument("cannot aggregate an empty set of score rows");

    std::map<std::string, Columns> groups;
    Columns all;
    for (const auto& row : rows) {
        groups[row.dataset_id].add(row.scores);
        all.add(row.scores);
    }

    EvalReport report;
    Columns means;
    for (const auto& [id, cols] : groups) {
        const auto g = cols.summary();
        report.datasets[id] = g;
        means.add({g.mean_p, g.mean_r, g.mean_f});
        report.overall.n += g.n;
    }
    const auto overall = means.summary();
    report.overall.mean_f = overall.mean_f;
    report.overall.mean_p = overall.mean_p;
    report.overall.mean_r = overall.mean_r;
    report.per_image = all.summary();
    return report;
}

namespace {

nlohmann::ordered_json summary_json(const GroupSummary& g) {
    nlohmann::ordered_json j;
    j["mean_f"] = g.mean_f;
    j["mean_p"] = g.mean_p;
    j["mean_r"] = g.mean_r;
    j["n"] = g.n;
    return j;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string signed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.4f", v);
    return buf;
}

// Left-aligned first column, right-aligned rest, two spaces between columns.
std::string render(const std::vector<std::vector<std::string>>& cells) {
    std::vector<std::size_t> widths;
    for (const auto& row : cells) {
        widths.resize(std::max(widths.size(), row.size()), 0);
        for (std::size_t c = 0; c < row.size(); ++c)
            widths[c] = std::max(widths[c], row[c].size());
    }
    std::ostringstream out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0)
                line += "  ";
            const auto pad = std::string(widths[c] - row[c].size(), ' ');
            line += c == 0 ? row[c] + pad : pad + row[c];
        }
        while (!line.empty() && line.back() == ' ')
            line.pop_back();
        out << line << '\n';
    }
    return out.str();
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json datasets = nlohmann::ordered_json::object();
    for (const auto& [id, g] : report.datasets)
        datasets[id] = summary_json(g);
    j["datasets"] = std::move(datasets);
    j["overall"] = summary_json(report.overall);
    j["per_image"] = summary_json(report.per_image);
    return j;
}

std::string format_table(const EvalReport& report) {
    std::vector<std::vector<std::string>> cells{{"dataset", "n", "mean_p", "mean_r", "mean_f"}};
    for (const auto& [id, g] : report.datasets)
        cells.push_back({id, std::to_string(g.n), fixed4(g.mean_p), fixed4(g.mean_r), fixed4(g.mean_f)});
    const auto& o = report.overall;
    cells.push_back({"overall(dataset-mean)", std::to_string(o.n), fixed4(o.mean_p), fixed4(o.mean_r), fixed4(o.mean_f)});
    const auto& pi = report.per_image;
    cells.push_back({"overall(image-mean)", std::to_string(pi.n), fixed4(pi.mean_p), fixed4(pi.mean_r), fixed4(pi.mean_f)});
    return render(cells);
}

CompareReport compare(const std::vector<ScoreRow>& base_rows, const std::vector<ScoreRow>& fused_rows,
                      double tie_tolerance) {
    std::unordered_map<std::string, const ScoreRow*> fused_by_id;
    for (const auto& r : fused_rows)
        if (!fused_by_id.emplace(r.pair_id, &r).second)
            throw std::invalid_argument("duplicate pair id in fused rows: " + r.pair_id);

    std::set<std::string> base_ids;
    for (const auto& r : base_rows)
        if (!base_ids.insert(r.pair_id).second)
            throw std::invalid_argument("duplicate pair id in base rows: " + r.pair_id);
    if (base_ids.size() != fused_by_id.size())
        throw std::invalid_argument("base and fused rows cover different pair sets");

    CompareReport report;
    for (const auto& b : base_rows) {
        auto it = fused_by_id.find(b.pair_id);
        if (it == fused_by_id.end())
            throw std::invalid_argument("pair missing from fused rows: " + b.pair_id);
        PairDelta d{b.pair_id, b.dataset_id, b.scores.fscore, it->second->scores.fscore, 0.0};
        d.delta = d.fused_f - d.base_f;
        if (std::abs(d.delta) <= tie_tolerance)
            ++report.ties;
        else if (d.delta > 0)
            ++report.wins;
        else
            ++report.losses;
        report.pairs.push_back(std::move(d));
    }

    std::vector<ScoreRow> fused_aligned;
    fused_aligned.reserve(base_rows.size());
    for (const auto& b : base_rows) {
        auto row = *fused_by_id.at(b.pair_id);
        row.dataset_id = b.dataset_id;
        fused_aligned.push_back(std::move(row));
    }
    if (!base_rows.empty()) {
        const auto base_report = aggregate(base_rows);
        const auto fused_report = aggregate(fused_aligned);
        for (const auto& [id, g] : base_report.datasets)
            report.dataset_delta[id] = fused_report.datasets.at(id).mean_f - g.mean_f;
        report.overall_delta = fused_report.overall.mean_f - base_report.overall.mean_f;
    }
    return report;
}

nlohmann::ordered_json to_json(const CompareReport& report) {
    nlohmann::ordered_json j;
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& d : report.pairs) {
        nlohmann::ordered_json p;
        p["pair_id"] = d.pair_id;
        p["dataset_id"] = d.dataset_id;
        p["base_f"] = d.base_f;
        p["fused_f"] = d.fused_f;
        p["delta_f"] = d.delta;
        pairs.push_back(std::move(p));
    }
    j["pairs"] = std::move(pairs);
    nlohmann::ordered_json datasets = nlohmann::ordered_json::object();
    for (const auto& [id, d] : report.dataset_delta)
        datasets[id] = {{"delta_mean_f", d}};
    j["datasets"] = std::move(datasets);
    j["overall"] = {{"delta_mean_f", report.overall_delta},
                    {"wins", report.wins},
                    {"losses", report.losses},
                    {"ties", report.ties}};
    return j;
}

std::string format_table(const CompareReport& report) {
    std::vector<std::vector<std::string>> cells{{"dataset", "delta_mean_f"}};
    for (const auto& [id, d] : report.dataset_delta)
        cells.push_back({id, signed4(d)});
    cells.push_back({"overall", signed4(report.overall_delta)});
    auto text = render(cells);
    text += "wins " + std::to_string(report.wins) + "  losses " + std::to_string(report.losses) + "  ties " +
            std::to_string(report.ties) + "\n";
    return text;
}

}  // namespace doicd
