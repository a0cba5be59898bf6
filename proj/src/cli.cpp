#include "doicd/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "doicd/coco.hpp"
#include "doicd/eval.hpp"
#include "doicd/fixture_backend.hpp"
#include "doicd/http_backend.hpp"
#include "doicd/parallel.hpp"
#include "doicd/pipeline.hpp"
#include "doicd/synth.hpp"

namespace doicd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for bad arguments or inputs; maps to exit status 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::optional<std::string>& path) {
    if (!path)
        return json::object();
    std::ifstream in(*path);
    if (!in)
        throw UsageError("cannot open config file: " + *path);
    try {
        auto j = json::parse(in);
        if (!j.is_object())
            throw UsageError("config file must hold a JSON object: " + *path);
        return j;
    } catch (const json::exception& e) {
        throw UsageError("malformed config file " + *path + ": " + e.what());
    }
}

// Flag, then config file, then fallback.
template <class T>
T pick(const std::optional<T>& flag, const json& config, const char* key, T fallback) {
    if (flag)
        return *flag;
    if (config.contains(key)) {
        try {
            return config.at(key).get<T>();
        } catch (const json::exception& e) {
            throw UsageError(std::string("bad value for config key '") + key + "': " + e.what());
        }
    }
    return fallback;
}

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0')
        return std::nullopt;
    return std::string(v);
}

struct SynthArgs {
    std::string bank;
    std::optional<std::string> bank_images;
    std::string backgrounds;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::optional<double> scale_min, scale_max;
    std::optional<int> objects_per_sample;
    std::optional<std::size_t> workers;
    bool include_crowd = false;
    std::optional<std::string> config;
};

struct DetectArgs {
    std::string pairs;
    std::string out;
    std::optional<std::string> fixtures;
    std::optional<std::string> backend_url;
    std::optional<double> threshold, doi_lower, doi_upper, confidence_floor, timeout;
    std::optional<int> dilate_iters, dilate_kernel, retries, max_connections;
    std::optional<std::size_t> workers, parallel_requests;
    std::optional<std::vector<std::string>> banned_words;
    bool substring_filter = false;
    bool no_ovs = false;
    bool assume_aligned = false;
    bool continue_on_error = false;
    std::optional<std::string> config;
};

struct EvalArgs {
    std::string pairs;
    std::string pred_dir;
    std::string mask = "fused.png";
    std::optional<std::string> baseline_dir;
    std::string baseline_mask = "base.png";
    std::optional<std::string> json_out;
};

struct ListArgs {
    std::string run_dir;
    bool json_format = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
    const auto config = load_config(a.config);
    if (!fs::is_regular_file(a.bank))
        throw UsageError("object bank not found: " + a.bank);
    if (!fs::is_regular_file(a.backgrounds))
        throw UsageError("background manifest not found: " + a.backgrounds);

    SynthConfig sc;
    sc.count = a.count;
    sc.seed = a.seed;
    sc.scale_range.min = pick(a.scale_min, config, "scale_min", sc.scale_range.min);
    sc.scale_range.max = pick(a.scale_max, config, "scale_max", sc.scale_range.max);
    sc.objects_per_sample = pick(a.objects_per_sample, config, "objects_per_sample", 1);
    sc.workers = pick(a.workers, config, "workers", default_worker_count());

    std::vector<BackgroundEntry> backgrounds;
    std::vector<ObjectCutout> bank;
    try {
        backgrounds = load_background_manifest(a.backgrounds);
        const fs::path image_root = a.bank_images ? fs::path(*a.bank_images) : fs::path(a.bank).parent_path();
        bank = load_object_bank(a.bank, image_root, {.include_crowd = a.include_crowd});
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (a.count > 0 && (backgrounds.empty() || bank.empty()))
        throw UsageError(backgrounds.empty() ? "background manifest is empty: " + a.backgrounds
                                             : "object bank has no usable annotations: " + a.bank);

    if (a.count == 0) {
        fs::create_directories(a.out);
        std::ofstream(fs::path(a.out) / "manifest.jsonl", std::ios::trunc);
        out << "wrote 0 samples to " << a.out << "\n";
        return kExitOk;
    }
    try {
        const auto samples = generate_dataset(backgrounds, bank, sc, a.out);
        out << "wrote " << samples.size() << " samples to " << a.out << "\n";
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    } catch (const std::exception& e) {
        err << "synth failed: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitOk;
}

std::unique_ptr<ModelBackend> make_backend(const DetectArgs& a, const json& config) {
    auto fixtures = a.fixtures;
    auto url = a.backend_url;
    if (!fixtures && !url) {
        if (config.contains("fixtures"))
            fixtures = pick<std::string>(std::nullopt, config, "fixtures", "");
        else if (config.contains("backend_url"))
            url = pick<std::string>(std::nullopt, config, "backend_url", "");
        else
            url = env(kBackendUrlEnv);
    }
    if (fixtures && url)
        throw UsageError("give either --fixtures or --backend-url, not both");
    if (fixtures) {
        try {
            return std::make_unique<FixtureBackend>(FixtureIndex::load(*fixtures));
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    if (!url)
        throw UsageError(std::string("no backend configured: pass --fixtures or --backend-url, or set ") +
                         kBackendUrlEnv);
    HttpBackendConfig hc;
    hc.base_url = *url;
    hc.timeout_seconds = pick(a.timeout, config, "timeout", hc.timeout_seconds);
    hc.retries = pick(a.retries, config, "retries", hc.retries);
    hc.max_connections = pick(a.max_connections, config, "max_connections", hc.max_connections);
    try {
        return std::make_unique<HttpBackend>(hc);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

int cmd_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
    const auto config = load_config(a.config);

    DetectConfig dc;
    dc.threshold = pick(a.threshold, config, "threshold", dc.threshold);
    dc.doi.lower = pick(a.doi_lower, config, "doi_lower", dc.doi.lower);
    dc.doi.upper = pick(a.doi_upper, config, "doi_upper", dc.doi.upper);
    dc.search.dilation_iterations = pick(a.dilate_iters, config, "dilate_iters", dc.search.dilation_iterations);
    dc.search.dilation_kernel = pick(a.dilate_kernel, config, "dilate_kernel", dc.search.dilation_kernel);
    dc.search.confidence_floor = pick(a.confidence_floor, config, "confidence_floor", dc.search.confidence_floor);
    dc.search.max_parallel_requests = pick(a.parallel_requests, config, "parallel_requests", std::size_t{1});
    dc.search.filter.banned_words = pick(a.banned_words, config, "banned_words", dc.search.filter.banned_words);
    dc.search.filter.whole_word =
        a.substring_filter ? false : pick<bool>(std::nullopt, config, "whole_word_filter", true);
    dc.workers = pick(a.workers, config, "workers", default_worker_count());
    dc.no_ovs = a.no_ovs || pick<bool>(std::nullopt, config, "no_ovs", false);
    dc.continue_on_error = a.continue_on_error || pick<bool>(std::nullopt, config, "continue_on_error", false);

    if (!(dc.threshold >= 0.0 && dc.threshold <= 1.0))
        throw UsageError("--threshold must lie in [0,1]");
    if (!(dc.doi.lower <= dc.doi.upper))
        throw UsageError("--doi-lower must not exceed --doi-upper");
    if (dc.search.dilation_iterations < 0)
        throw UsageError("--dilate-iters must be non-negative");
    if (dc.search.dilation_kernel < 1 || dc.search.dilation_kernel % 2 == 0)
        throw UsageError("--dilate-kernel must be odd and positive");

    std::vector<PairEntry> pairs;
    try {
        pairs = load_pair_manifest(a.pairs);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    auto backend = make_backend(a, config);

    if (a.assume_aligned)
        err << "note: reference/live pairs are assumed pre-aligned; no registration is performed\n";
    else
        err << "warning: no image registration is performed; pass --assume-aligned to acknowledge pre-aligned "
               "inputs\n";

    const auto summary = run_detect(pairs, *backend, dc, a.out);
    for (const auto& o : summary.outcomes) {
        if (o.record) {
            out << o.pair_id << "\t";
            if (o.record->doi)
                out << to_string(o.record->doi->decision) << "\tdoi=" << o.record->doi->doi << "\n";
            else
                out << "NoOvs\n";
        } else if (o.skipped) {
            err << o.pair_id << ": skipped\n";
        } else {
            err << o.pair_id << ": " << o.error << "\n";
        }
    }
    if (summary.failures > 0 || summary.skipped > 0) {
        err << summary.failures << " of " << pairs.size() << " pairs failed";
        if (summary.skipped > 0)
            err << ", " << summary.skipped << " skipped";
        err << "\n";
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<PairEntry> pairs;
    try {
        pairs = load_pair_manifest(a.pairs);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (pairs.empty())
        throw UsageError("pair manifest is empty: " + a.pairs);

    auto result = evaluate_predictions(pairs, a.pred_dir, a.mask);
    for (const auto& [id, msg] : result.errors)
        err << id << ": " << msg << "\n";
    if (result.rows.empty()) {
        err << "no pair could be scored\n";
        return kExitPartial;
    }

    nlohmann::ordered_json report;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : result.rows) {
        nlohmann::ordered_json rj;
        rj["pair_id"] = r.pair_id;
        rj["dataset_id"] = r.dataset_id;
        rj["precision"] = r.scores.precision;
        rj["recall"] = r.scores.recall;
        rj["fscore"] = r.scores.fscore;
        rj["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}};
        rows.push_back(std::move(rj));
    }
    const auto summary = aggregate(result.rows);
    report["rows"] = std::move(rows);
    report["report"] = to_json(summary);
    out << format_table(summary);

    bool partial = !result.errors.empty();
    if (a.baseline_dir) {
        auto base = evaluate_predictions(pairs, *a.baseline_dir, a.baseline_mask);
        for (const auto& [id, msg] : base.errors)
            err << id << " (baseline): " << msg << "\n";
        partial = partial || !base.errors.empty();
        // Compare only pairs scored on both sides.
        std::set<std::string> scored;
        for (const auto& r : result.rows)
            scored.insert(r.pair_id);
        std::set<std::string> both;
        for (const auto& r : base.rows)
            if (scored.count(r.pair_id))
                both.insert(r.pair_id);
        std::vector<ScoreRow> b, f;
        for (const auto& r : base.rows)
            if (both.count(r.pair_id))
                b.push_back(r);
        for (const auto& r : result.rows)
            if (both.count(r.pair_id))
                f.push_back(r);
        if (!b.empty()) {
            const auto cmp = compare(b, f);
            report["compare"] = to_json(cmp);
            out << "\n" << format_table(cmp);
        }
    }

    if (a.json_out) {
        std::ofstream jout(*a.json_out, std::ios::trunc);
        if (!jout)
            throw UsageError("cannot write report: " + *a.json_out);
        jout << report.dump(2) << "\n";
    }
    return partial ? kExitPartial : kExitOk;
}

int cmd_list_objects(const ListArgs& a, std::ostream& out) {
    std::vector<ListingRow> rows;
    try {
        rows = list_objects(a.run_dir);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (a.json_format)
        out << to_json(rows).dump(2) << "\n";
    else
        out << format_listing(rows);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Change detection with degree-of-ill-posedness fusion"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a copy-paste synthetic change dataset");
    synth->add_option("--bank", sa.bank, "COCO-style annotation JSON")->required();
    synth->add_option("--bank-images", sa.bank_images, "Image directory for the bank (default: bank file's directory)");
    synth->add_option("--backgrounds", sa.backgrounds, "Background manifest (JSON lines {id, path})")->required();
    synth->add_option("--count", sa.count, "Number of samples")->required();
    synth->add_option("--seed", sa.seed, "Random seed");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--scale-min", sa.scale_min, "Smallest object size (longest side / background shorter side)");
    synth->add_option("--scale-max", sa.scale_max, "Largest object size");
    synth->add_option("--objects-per-sample", sa.objects_per_sample, "Non-overlapping objects pasted per sample");
    synth->add_option("--workers", sa.workers, "Worker threads");
    synth->add_flag("--include-crowd", sa.include_crowd, "Also use iscrowd annotations");
    synth->add_option("--config", sa.config, "JSON config file");

    DetectArgs da;
    auto* detect = app.add_subcommand("detect", "Run change detection and DoI fusion over a pair manifest");
    detect->add_option("--pairs", da.pairs, "Pair manifest (JSON lines)")->required();
    detect->add_option("--out", da.out, "Output directory")->required();
    detect->add_option("--fixtures", da.fixtures, "Fixture backend root");
    detect->add_option("--backend-url", da.backend_url, std::string("HTTP backend base URL (env ") + kBackendUrlEnv + ")");
    detect->add_option("--threshold", da.threshold, "Change probability threshold (strict)");
    detect->add_option("--doi-lower", da.doi_lower, "Lower DoI bound (exclusive)");
    detect->add_option("--doi-upper", da.doi_upper, "Upper DoI bound (exclusive)");
    detect->add_option("--dilate-iters", da.dilate_iters, "Dilation iterations for query regions");
    detect->add_option("--dilate-kernel", da.dilate_kernel, "Dilation kernel size (odd)");
    detect->add_option("--confidence-floor", da.confidence_floor, "Drop proposals below this confidence");
    detect->add_option("--banned-word", da.banned_words, "Label word to filter (repeatable; default floor)");
    detect->add_flag("--substring-filter", da.substring_filter, "Filter labels by substring instead of whole word");
    detect->add_option("--workers", da.workers, "Pairs processed concurrently");
    detect->add_option("--parallel-requests", da.parallel_requests, "Concurrent backend calls per pair");
    detect->add_option("--timeout", da.timeout, "HTTP timeout in seconds");
    detect->add_option("--retries", da.retries, "HTTP retries on transport failure");
    detect->add_option("--max-connections", da.max_connections, "Concurrent HTTP connections");
    detect->add_flag("--no-ovs", da.no_ovs, "Skip object search; output the thresholded base mask");
    detect->add_flag("--assume-aligned", da.assume_aligned, "Acknowledge that pairs are pre-aligned");
    detect->add_flag("--continue-on-error", da.continue_on_error, "Keep processing after a pair fails");
    detect->add_option("--config", da.config, "JSON config file");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Score predicted masks against ground truth");
    eval->add_option("--pairs", ea.pairs, "Pair manifest with gt_path")->required();
    eval->add_option("--pred-dir", ea.pred_dir, "Directory of <pair_id>/<mask> predictions")->required();
    eval->add_option("--mask", ea.mask, "Prediction file name inside each pair directory");
    eval->add_option("--baseline-dir", ea.baseline_dir, "Second prediction set to compare against");
    eval->add_option("--baseline-mask", ea.baseline_mask, "Baseline file name inside each pair directory");
    eval->add_option("--json", ea.json_out, "Write the JSON report here");

    ListArgs la;
    auto* list = app.add_subcommand("list-objects", "List detected objects with their names");
    list->add_option("--run-dir", la.run_dir, "Output directory of a detect run")->required();
    list->add_flag("--json", la.json_format, "Emit JSON instead of a table");

    std::vector<const char*> argv;
    for (const auto& s : args)
        argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed())
            return cmd_synth(sa, out, err);
        if (detect->parsed())
            return cmd_detect(da, out, err);
        if (eval->parsed())
            return cmd_eval(ea, out, err);
        if (list->parsed())
            return cmd_list_objects(la, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitUsage;
}

}  // namespace doicd::cli
