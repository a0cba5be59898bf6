#include "doicd/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "doicd/image.hpp"
#include "doicd/parallel.hpp"

namespace doicd {

namespace fs = std::filesystem;

std::vector<PairEntry> load_pair_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in)
        throw std::runtime_error("cannot open pair manifest: " + manifest.string());
    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_relative() ? manifest.parent_path() / path : path;
    };

    std::vector<PairEntry> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto where = manifest.string() + ":" + std::to_string(lineno);
        PairEntry e;
        try {
            const auto j = nlohmann::json::parse(line);
            e.pair_id = j.at("pair_id").get<std::string>();
            e.ref_path = resolve(j.at("ref_path").get<std::string>());
            e.live_path = resolve(j.at("live_path").get<std::string>());
            if (j.contains("gt_path") && !j.at("gt_path").is_null())
                e.gt_path = resolve(j.at("gt_path").get<std::string>());
            e.dataset_id = j.value("dataset_id", std::string("default"));
        } catch (const nlohmann::json::exception& ex) {
            throw std::runtime_error(where + ": " + ex.what());
        }
        if (e.pair_id.empty() || e.pair_id.find('/') != std::string::npos || e.pair_id == "." || e.pair_id == "..")
            throw std::runtime_error(where + ": invalid pair_id '" + e.pair_id + "'");
        if (!ids.insert(e.pair_id).second)
            throw std::runtime_error(where + ": duplicate pair_id '" + e.pair_id + "'");
        for (const auto* p : {&e.ref_path, &e.live_path})
            if (!fs::is_regular_file(*p))
                throw std::runtime_error(where + ": missing file " + p->string());
        if (e.gt_path && !fs::is_regular_file(*e.gt_path))
            throw std::runtime_error(where + ": missing file " + e.gt_path->string());
        out.push_back(std::move(e));
    }
    return out;
}

nlohmann::ordered_json to_json(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["pair_id"] = r.pair_id;
    j["dataset_id"] = r.dataset_id;
    j["ovs"] = r.ovs;
    nlohmann::ordered_json masks = nlohmann::ordered_json::object();
    for (const auto* role : {"base", "ovs_live", "ovs_ref", "fused"})
        if (auto it = r.masks.find(role); it != r.masks.end())
            masks[role] = it->second;
    j["masks"] = std::move(masks);
    j["doi"] = r.doi ? to_json(*r.doi) : nlohmann::ordered_json(nullptr);
    j["labels"] = r.labels;
    auto comps = nlohmann::ordered_json::array();
    for (const auto& c : r.components) {
        nlohmann::ordered_json cj;
        cj["index"] = c.index;
        cj["label"] = c.label ? nlohmann::ordered_json(*c.label) : nlohmann::ordered_json(nullptr);
        cj["pixels"] = c.pixels;
        cj["bbox"] = {c.bbox.x, c.bbox.y, c.bbox.width, c.bbox.height};
        comps.push_back(std::move(cj));
    }
    j["components"] = std::move(comps);
    return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.pair_id = j.at("pair_id").get<std::string>();
    r.dataset_id = j.value("dataset_id", std::string{});
    r.ovs = j.value("ovs", true);
    for (const auto& [role, file] : j.at("masks").items())
        r.masks[role] = file.get<std::string>();
    if (!j.at("doi").is_null())
        r.doi = doi_record_from_json(j.at("doi"));
    r.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& cj : j.at("components")) {
        ComponentInfo c;
        c.index = cj.at("index").get<std::size_t>();
        if (!cj.at("label").is_null())
            c.label = cj.at("label").get<std::string>();
        c.pixels = cj.at("pixels").get<std::size_t>();
        const auto box = cj.at("bbox").get<std::vector<int>>();
        if (box.size() != 4)
            throw std::runtime_error("run record bbox must have four entries");
        c.bbox = {box[0], box[1], box[2], box[3]};
        r.components.push_back(std::move(c));
    }
    return r;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

RunRecord process_pair(const PairEntry& pair, ModelBackend& backend, const DetectConfig& config,
                       const fs::path& out_dir) {
    RunRecord rec;
    rec.pair_id = pair.pair_id;
    rec.dataset_id = pair.dataset_id;
    rec.ovs = !config.no_ovs;

    const auto ref = load_image(pair.ref_path);
    const auto live = load_image(pair.live_path);
    require_same_extent(ref.extent(), live.extent(), ("pair " + pair.pair_id).c_str());

    auto t0 = Clock::now();
    const auto prob = backend.detect_change({.pair_id = pair.pair_id, .ref = ref, .live = live});
    const auto base = threshold(prob, config.threshold);
    rec.timing_ms["change"] = ms_since(t0);

    const auto pair_dir = out_dir / pair.pair_id;
    fs::create_directories(pair_dir);
    save_mask(base, pair_dir / "base.png");
    rec.masks["base"] = "base.png";

    if (config.no_ovs) {
        save_mask(base, pair_dir / "fused.png");
        rec.masks["fused"] = "fused.png";
    } else {
        t0 = Clock::now();
        const auto search = search_objects(pair.pair_id, live, ref, base, backend, config.search);
        rec.timing_ms["search"] = ms_since(t0);

        t0 = Clock::now();
        const auto doi = compute_doi(search.live_object_mask, search.ref_object_mask, base, config.doi);
        const auto& fused = fuse(doi, search.live_object_mask, base);
        rec.timing_ms["fuse"] = ms_since(t0);
        rec.doi = doi;
        rec.labels = search.labels;

        for (std::size_t i = 0; i < search.query_regions.size(); ++i) {
            BinaryMask changed(base.extent());
            const auto& region = search.query_regions[i];
            for (int y = 0; y < base.height(); ++y)
                for (int x = 0; x < base.width(); ++x)
                    if (region.at(x, y) && base.at(x, y))
                        changed.set(x, y);
            ComponentInfo info{.index = i, .label = std::nullopt, .pixels = changed.count(), .bbox = bounding_box(changed)};
            for (const auto& cl : search.per_component_labels)
                if (cl.component == i)
                    info.label = cl.label;
            rec.components.push_back(std::move(info));
        }

        save_mask(search.live_object_mask, pair_dir / "ovs_live.png");
        save_mask(search.ref_object_mask, pair_dir / "ovs_ref.png");
        save_mask(fused, pair_dir / "fused.png");
        rec.masks["ovs_live"] = "ovs_live.png";
        rec.masks["ovs_ref"] = "ovs_ref.png";
        rec.masks["fused"] = "fused.png";
    }

    write_text(pair_dir / "record.json", to_json(rec).dump(2) + "\n");
    nlohmann::ordered_json timing(rec.timing_ms);
    write_text(pair_dir / "timing.json", timing.dump(2) + "\n");
    return rec;
}

DetectSummary run_detect(const std::vector<PairEntry>& pairs, ModelBackend& backend, const DetectConfig& config,
                         const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::atomic<bool> abort{false};
    auto outcomes = parallel_map(pairs.size(), config.workers, [&](std::size_t i) {
        PairOutcome o;
        o.pair_id = pairs[i].pair_id;
        if (abort.load()) {
            o.skipped = true;
            o.error = "skipped after an earlier failure";
            return o;
        }
        try {
            o.record = process_pair(pairs[i], backend, config, out_dir);
        } catch (const std::exception& e) {
            o.error = e.what();
            if (!config.continue_on_error)
                abort = true;
        }
        return o;
    });

    DetectSummary summary;
    std::ostringstream index;
    for (auto& o : outcomes) {
        if (o.record) {
            nlohmann::ordered_json line;
            line["pair_id"] = o.pair_id;
            line["record"] = (fs::path(o.pair_id) / "record.json").generic_string();
            index << line.dump() << '\n';
        } else if (o.skipped) {
            ++summary.skipped;
        } else {
            ++summary.failures;
        }
    }
    write_text(out_dir / "run_index.jsonl", index.str());
    summary.outcomes = std::move(outcomes);
    return summary;
}

std::vector<ListingRow> list_objects(const fs::path& run_dir) {
    const auto index_path = run_dir / "run_index.jsonl";
    std::ifstream in(index_path);
    if (!in)
        throw std::runtime_error("missing run records: " + index_path.string());
    std::vector<ListingRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto entry = nlohmann::json::parse(line);
        const auto record_path = run_dir / entry.at("record").get<std::string>();
        std::ifstream rin(record_path);
        if (!rin)
            throw std::runtime_error("missing run record: " + record_path.string());
        nlohmann::json j;
        rin >> j;
        const auto rec = run_record_from_json(j);
        for (const auto& c : rec.components)
            if (c.label)
                rows.push_back({rec.pair_id, c.index, *c.label, c.pixels, c.bbox});
    }
    return rows;
}

std::string format_listing(const std::vector<ListingRow>& rows) {
    std::ostringstream out;
    out << "pair_id\tcomponent\tlabel\tpixels\tbbox\n";
    for (const auto& r : rows)
        out << r.pair_id << '\t' << r.component << '\t' << r.label << '\t' << r.pixels << '\t' << r.bbox.x << ','
            << r.bbox.y << ',' << r.bbox.width << ',' << r.bbox.height << '\n';
    return out.str();
}

nlohmann::ordered_json to_json(const std::vector<ListingRow>& rows) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["pair_id"] = r.pair_id;
        j["component"] = r.component;
        j["label"] = r.label;
        j["pixels"] = r.pixels;
        j["bbox"] = {r.bbox.x, r.bbox.y, r.bbox.width, r.bbox.height};
        arr.push_back(std::move(j));
    }
    return arr;
}

EvalOutcome evaluate_predictions(const std::vector<PairEntry>& pairs, const fs::path& pred_dir,
                                 const std::string& mask_name) {
    EvalOutcome out;
    for (const auto& p : pairs) {
        if (!p.gt_path) {
            out.errors.emplace_back(p.pair_id, "no gt_path in manifest");
            continue;
        }
        try {
            const auto pred = load_mask(pred_dir / p.pair_id / mask_name);
            const auto gt = load_mask(*p.gt_path);
            out.rows.push_back(score_pair(p.pair_id, p.dataset_id, pred, gt));
        } catch (const std::exception& e) {
            out.errors.emplace_back(p.pair_id, e.what());
        }
    }
    return out;
}

}  // namespace doicd
