#include "doicd/fixture_backend.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace doicd {

namespace fs = std::filesystem;

std::string url_encode_label(std::string_view label) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : label) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xF]);
        }
    }
    return out;
}

std::string url_decode_label(std::string_view encoded) {
    auto hex = [&](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        throw std::invalid_argument("bad percent-escape in fixture label: " + std::string(encoded));
    };
    std::string out;
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        if (encoded[i] == '%') {
            if (i + 2 >= encoded.size())
                throw std::invalid_argument("truncated percent-escape in fixture label: " + std::string(encoded));
            out.push_back(static_cast<char>(hex(encoded[i + 1]) * 16 + hex(encoded[i + 2])));
            i += 2;
        } else {
            out.push_back(encoded[i]);
        }
    }
    return out;
}

FixtureIndex::FixtureIndex(fs::path root, std::vector<FixtureEntry> entries)
    : root_(std::move(root)), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.endpoint == kEndpointChange) {
            if (!change_.emplace(e.pair_id, i).second)
                throw std::invalid_argument("duplicate change fixture for pair " + e.pair_id);
        } else if (e.endpoint == kEndpointDescribe) {
            if (!describe_.emplace(std::pair{e.pair_id, e.region_index}, i).second)
                throw std::invalid_argument("duplicate describe fixture for pair " + e.pair_id + " region " +
                                            std::to_string(e.region_index));
        } else if (e.endpoint == kEndpointSegment) {
            segment_[{e.pair_id, e.image, e.label}].push_back(i);
        } else {
            throw std::invalid_argument("unknown fixture endpoint: " + e.endpoint);
        }
    }
    for (auto& [key, list] : segment_) {
        std::sort(list.begin(), list.end(), [&](auto a, auto b) { return entries_[a].k < entries_[b].k; });
        for (std::size_t j = 1; j < list.size(); ++j)
            if (entries_[list[j]].k == entries_[list[j - 1]].k)
                throw std::invalid_argument("duplicate segment fixture index for pair " + std::get<0>(key));
    }
}

FixtureIndex FixtureIndex::load(const fs::path& root) {
    const auto index_path = root / "index.json";
    if (fs::is_directory(root) && !fs::exists(index_path))
        return scan(root);
    std::ifstream in(index_path);
    if (!in)
        throw std::runtime_error("fixture index not found: " + index_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed fixture index " + index_path.string() + ": " + e.what());
    }

    std::vector<FixtureEntry> entries;
    try {
        for (const auto& item : j.at("entries")) {
            FixtureEntry e;
            e.pair_id = item.at("pair_id").get<std::string>();
            e.endpoint = item.at("endpoint").get<std::string>();
            e.file = item.at("file").get<std::string>();
            if (e.endpoint == kEndpointDescribe)
                e.region_index = item.at("region_index").get<std::size_t>();
            if (e.endpoint == kEndpointSegment) {
                e.image = parse_image_role(item.at("image").get<std::string>());
                e.label = item.at("label").get<std::string>();
                e.k = item.at("k").get<std::size_t>();
                if (item.contains("confidence"))
                    e.confidence = item.at("confidence").get<double>();
            }
            if (!fs::is_regular_file(root / e.file))
                throw std::runtime_error("fixture index entry points to missing file: " + (root / e.file).string());
            entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed fixture index " + index_path.string() + ": " + e.what());
    }
    return FixtureIndex(root, std::move(entries));
}

namespace {

std::optional<std::size_t> parse_index(const std::string& stem) {
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); }))
        return std::nullopt;
    return static_cast<std::size_t>(std::stoull(stem));
}

std::vector<fs::path> sorted_children(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir))
        return out;
    for (const auto& d : fs::directory_iterator(dir))
        out.push_back(d.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

FixtureIndex FixtureIndex::scan(const fs::path& root) {
    std::vector<FixtureEntry> entries;
    for (const auto& pair_dir : sorted_children(root)) {
        if (!fs::is_directory(pair_dir))
            continue;
        const auto pair_id = pair_dir.filename().string();
        if (fs::is_regular_file(pair_dir / "change.png"))
            entries.push_back({.pair_id = pair_id,
                               .endpoint = std::string(kEndpointChange),
                               .file = fs::relative(pair_dir / "change.png", root)});
        for (const auto& f : sorted_children(pair_dir / "describe")) {
            const auto idx = parse_index(f.stem().string());
            if (f.extension() != ".txt" || !idx)
                continue;
            entries.push_back({.pair_id = pair_id,
                               .endpoint = std::string(kEndpointDescribe),
                               .region_index = *idx,
                               .file = fs::relative(f, root)});
        }
        for (ImageRole role : {ImageRole::Live, ImageRole::Ref}) {
            for (const auto& label_dir : sorted_children(pair_dir / "segment" / std::string(to_string(role)))) {
                for (const auto& f : sorted_children(label_dir)) {
                    const auto k = parse_index(f.stem().string());
                    if (f.extension() != ".png" || !k)
                        continue;
                    entries.push_back({.pair_id = pair_id,
                                       .endpoint = std::string(kEndpointSegment),
                                       .image = role,
                                       .label = url_decode_label(label_dir.filename().string()),
                                       .k = *k,
                                       .file = fs::relative(f, root)});
                }
            }
        }
    }
    return FixtureIndex(root, std::move(entries));
}

void FixtureIndex::save() const {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& e : entries_) {
        nlohmann::ordered_json item;
        item["pair_id"] = e.pair_id;
        item["endpoint"] = e.endpoint;
        if (e.endpoint == kEndpointDescribe)
            item["region_index"] = e.region_index;
        if (e.endpoint == kEndpointSegment) {
            item["image"] = std::string(to_string(e.image));
            item["label"] = e.label;
            item["k"] = e.k;
        }
        item["file"] = e.file.generic_string();
        if (e.confidence)
            item["confidence"] = *e.confidence;
        list.push_back(std::move(item));
    }
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["entries"] = std::move(list);
    std::ofstream out(root_ / "index.json", std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write fixture index under " + root_.string());
    out << j.dump(2) << '\n';
}

const FixtureEntry* FixtureIndex::find_change(const std::string& pair_id) const {
    auto it = change_.find(pair_id);
    return it == change_.end() ? nullptr : &entries_[it->second];
}

const FixtureEntry* FixtureIndex::find_describe(const std::string& pair_id, std::size_t region_index) const {
    auto it = describe_.find({pair_id, region_index});
    return it == describe_.end() ? nullptr : &entries_[it->second];
}

std::vector<const FixtureEntry*> FixtureIndex::find_segment(const std::string& pair_id, ImageRole image,
                                                            const std::string& label) const {
    std::vector<const FixtureEntry*> out;
    auto it = segment_.find({pair_id, image, label});
    if (it != segment_.end())
        for (auto i : it->second)
            out.push_back(&entries_[i]);
    return out;
}

ProbabilityMask FixtureBackend::detect_change(const ChangeRequest& req) {
    const std::string endpoint(kEndpointChange);
    require_same_extent(req.ref.extent(), req.live.extent(), "change request (ref vs live)");
    const auto* entry = index_.find_change(req.pair_id);
    if (entry == nullptr)
        throw BackendError(endpoint, req.pair_id, "fixture missing");
    ProbabilityMask prob;
    try {
        prob = load_probability(index_.root() / entry->file);
    } catch (const ImageIoError& e) {
        throw BackendError(endpoint, req.pair_id, e.what());
    }
    if (prob.extent() != req.live.extent())
        throw BackendError(endpoint, req.pair_id,
                           "dimension mismatch: " + to_string(prob.extent()) + " vs " + to_string(req.live.extent()));
    return prob;
}

std::string FixtureBackend::describe(const DescribeRequest& req) {
    const std::string endpoint(kEndpointDescribe);
    require_same_extent(req.image.extent(), req.region.extent(), "describe request (image vs region)");
    const auto* entry = index_.find_describe(req.pair_id, req.region_index);
    if (entry == nullptr)
        throw BackendError(endpoint, req.pair_id, "fixture missing for region " + std::to_string(req.region_index));
    std::ifstream in(index_.root() / entry->file, std::ios::binary);
    if (!in)
        throw BackendError(endpoint, req.pair_id, "cannot read " + entry->file.string());
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

std::vector<ObjectProposal> FixtureBackend::segment(const SegmentRequest& req) {
    const std::string endpoint(kEndpointSegment);
    if (req.label.empty())
        throw BackendError(endpoint, req.pair_id, "empty segmentation label");
    std::vector<ObjectProposal> out;
    for (const auto* entry : index_.find_segment(req.pair_id, req.role, req.label)) {
        ObjectProposal p;
        p.label = req.label;
        p.confidence = entry->confidence;
        try {
            p.mask = load_mask(index_.root() / entry->file);
        } catch (const ImageIoError& e) {
            throw BackendError(endpoint, req.pair_id, e.what());
        }
        if (p.mask.extent() != req.image.extent())
            throw BackendError(endpoint, req.pair_id,
                               "dimension mismatch: " + to_string(p.mask.extent()) + " vs " +
                                   to_string(req.image.extent()));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace doicd
