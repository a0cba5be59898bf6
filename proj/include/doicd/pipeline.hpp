#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doicd/backend.hpp"
#include "doicd/doi.hpp"
#include "doicd/eval.hpp"
#include "doicd/mask.hpp"
#include "doicd/object_search.hpp"

namespace doicd {

/// One pre-aligned (reference, live) image pair.
struct PairEntry {
    std::string pair_id;
    std::filesystem::path ref_path;
    std::filesystem::path live_path;
    std::optional<std::filesystem::path> gt_path;
    std::string dataset_id;
};

/// JSON lines of {pair_id, ref_path, live_path, gt_path?, dataset_id}.
/// Relative paths resolve against the manifest's directory; ids must be unique
/// and every referenced file must exist.
std::vector<PairEntry> load_pair_manifest(const std::filesystem::path& manifest);

struct DetectConfig {
    double threshold = kDefaultChangeThreshold;
    DoiThresholds doi;
    SearchConfig search;
    bool no_ovs = false;
    std::size_t workers = 1;
    bool continue_on_error = false;
};

struct ComponentInfo {
    std::size_t index = 0;
    std::optional<std::string> label;
    std::size_t pixels = 0;  // base-mask pixels inside the query region
    BoundingBox bbox;
};

struct RunRecord {
    std::string pair_id;
    std::string dataset_id;
    bool ovs = true;
    std::optional<DoiRecord> doi;
    std::map<std::string, std::string> masks;  // role -> file name inside the pair directory
    std::vector<std::string> labels;
    std::vector<ComponentInfo> components;
    std::map<std::string, double> timing_ms;
};

/// Record as written to record.json. Timing is kept out so repeated runs
/// produce identical files; it goes to timing.json instead.
nlohmann::ordered_json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

struct PairOutcome {
    std::string pair_id;
    std::optional<RunRecord> record;
    std::string error;  // set when record is empty
    bool skipped = false;
};

/// Full pipeline on one pair: change detection, thresholding, object search,
/// DoI, fusion. Writes <out_dir>/<pair_id>/{base,ovs_live,ovs_ref,fused}.png,
/// record.json and timing.json.
RunRecord process_pair(const PairEntry& pair, ModelBackend& backend, const DetectConfig& config,
                       const std::filesystem::path& out_dir);

struct DetectSummary {
    std::vector<PairOutcome> outcomes;  // manifest order
    std::size_t failures = 0;
    std::size_t skipped = 0;
};

/// Runs every pair on a worker pool and writes <out_dir>/run_index.jsonl
/// (pair_id and record path of each successful pair, in manifest order).
DetectSummary run_detect(const std::vector<PairEntry>& pairs, ModelBackend& backend, const DetectConfig& config,
                         const std::filesystem::path& out_dir);

struct ListingRow {
    std::string pair_id;
    std::size_t component = 0;
    std::string label;
    std::size_t pixels = 0;
    BoundingBox bbox;
};

/// Labelled components of every record listed in <run_dir>/run_index.jsonl.
std::vector<ListingRow> list_objects(const std::filesystem::path& run_dir);
std::string format_listing(const std::vector<ListingRow>& rows);
nlohmann::ordered_json to_json(const std::vector<ListingRow>& rows);

struct EvalOutcome {
    std::vector<ScoreRow> rows;
    std::vector<std::pair<std::string, std::string>> errors;  // pair_id, message
};

/// Scores <pred_dir>/<pair_id>/<mask_name> against each pair's gt mask.
EvalOutcome evaluate_predictions(const std::vector<PairEntry>& pairs, const std::filesystem::path& pred_dir,
                                 const std::string& mask_name);

}  // namespace doicd
