#include "doicd/object_search.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "doicd/parallel.hpp"

namespace doicd {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

bool is_trailing_punct(char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' || c == '\'' ||
           c == ')' || c == ']';
}

// End of the first sentence: '!' '?' or newline, or a '.' followed by
// whitespace / end of text (so "3.5mm cable" survives).
std::size_t sentence_end(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '!' || c == '?' || c == '\n' || c == '\r')
            return i;
        if (c == '.' && (i + 1 == s.size() || is_space(s[i + 1])))
            return i;
    }
    return s.size();
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

}  // namespace

std::string build_prompt() {
    return std::string(kDescribePrompt);
}

std::optional<std::string> parse_label(std::string_view response) {
    static constexpr std::string_view kPattern = "this object is";
    std::string text = lowercase(response);

    auto pos = text.find(kPattern);
    if (pos == std::string::npos)
        return std::nullopt;
    std::string phrase = text.substr(pos + kPattern.size());
    // Echoed patterns ("this object is this object is a pen") collapse to the last one.
    while ((pos = phrase.find(kPattern)) != std::string::npos)
        phrase = phrase.substr(pos + kPattern.size());

    std::string_view view = phrase;
    view = view.substr(0, sentence_end(view));
    view = trim(view);
    while (!view.empty() && (view.front() == '"' || view.front() == '\'' || view.front() == ':'))
        view = trim(view.substr(1));
    for (std::string_view article : {"a ", "an ", "the "}) {
        if (view.starts_with(article)) {
            view = trim(view.substr(article.size()));
            break;
        }
    }
    while (!view.empty() && is_trailing_punct(view.back()))
        view = trim(view.substr(0, view.size() - 1));
    if (view == "a" || view == "an" || view == "the")
        return std::nullopt;

    // Collapse internal whitespace runs.
    std::string label;
    for (char c : view) {
        if (is_space(c)) {
            if (!label.empty() && label.back() != ' ')
                label.push_back(' ');
        } else {
            label.push_back(c);
        }
    }
    if (label.empty())
        return std::nullopt;
    return label;
}

bool is_banned_label(std::string_view label, const LabelFilterConfig& config) {
    if (config.whole_word) {
        const auto tokens = words(label);
        for (const auto& banned : config.banned_words) {
            const auto b = lowercase(banned);
            if (std::find(tokens.begin(), tokens.end(), b) != tokens.end())
                return true;
        }
        return false;
    }
    const auto lower = lowercase(label);
    return std::any_of(config.banned_words.begin(), config.banned_words.end(),
                       [&](const std::string& b) { return lower.find(lowercase(b)) != std::string::npos; });
}

std::vector<std::string> filter_labels(const std::vector<std::string>& labels, const LabelFilterConfig& config) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& label : labels) {
        if (is_banned_label(label, config))
            continue;
        if (seen.insert(label).second)
            out.push_back(label);
    }
    return out;
}

std::vector<BinaryMask> prepare_query_regions(const BinaryMask& base_mask, int dilation_iterations, int kernel) {
    return connected_components(dilate(base_mask, kernel, dilation_iterations));
}

SearchResult search_objects(const std::string& pair_id, const Image& live, const Image& ref,
                            const BinaryMask& base_mask, ModelBackend& backend, const SearchConfig& config) {
    require_same_extent(live.extent(), ref.extent(), "search_objects (live vs ref)");
    require_same_extent(live.extent(), base_mask.extent(), "search_objects (live vs base mask)");

    SearchResult result;
    result.query_regions = prepare_query_regions(base_mask, config.dilation_iterations, config.dilation_kernel);

    const auto prompt = build_prompt();
    result.responses = parallel_map(result.query_regions.size(), config.max_parallel_requests, [&](std::size_t i) {
        return backend.describe({.pair_id = pair_id,
                                 .image = live,
                                 .region = result.query_regions[i],
                                 .region_index = i,
                                 .prompt = prompt});
    });

    std::vector<std::string> parsed;
    for (std::size_t i = 0; i < result.responses.size(); ++i) {
        auto label = parse_label(result.responses[i]);
        if (!label)
            continue;
        parsed.push_back(*label);
        if (!is_banned_label(*label, config.filter))
            result.per_component_labels.push_back({i, *label});
    }
    result.labels = filter_labels(parsed, config.filter);

    // One task per (label, image): even indices live, odd indices ref.
    auto hits = parallel_map(result.labels.size() * 2, config.max_parallel_requests, [&](std::size_t task) {
        const auto& label = result.labels[task / 2];
        const bool is_live = task % 2 == 0;
        const Image& image = is_live ? live : ref;
        auto proposals = backend.segment({.pair_id = pair_id,
                                          .image = image,
                                          .role = is_live ? ImageRole::Live : ImageRole::Ref,
                                          .label = label});
        std::erase_if(proposals, [&](const ObjectProposal& p) {
            return p.confidence && *p.confidence < config.confidence_floor;
        });
        for (auto& p : proposals) {
            if (p.mask.extent() != image.extent())
                throw BackendError(std::string(kEndpointSegment), pair_id,
                                   "dimension mismatch: " + to_string(p.mask.extent()) + " vs " +
                                       to_string(image.extent()));
            if (p.label.empty())
                p.label = label;
        }
        return proposals;
    });

    for (std::size_t task = 0; task < hits.size(); ++task) {
        auto& dest = task % 2 == 0 ? result.live_proposals : result.ref_proposals;
        for (auto& p : hits[task])
            dest.push_back(std::move(p));
    }

    auto masks_of = [](const std::vector<ObjectProposal>& ps) {
        std::vector<BinaryMask> out;
        out.reserve(ps.size());
        for (const auto& p : ps)
            out.push_back(p.mask);
        return out;
    };
    result.live_object_mask = mask_union(masks_of(result.live_proposals), live.extent());
    result.ref_object_mask = mask_union(masks_of(result.ref_proposals), ref.extent());
    return result;
}

namespace {

nlohmann::ordered_json mask_json(const BinaryMask& m) {
    nlohmann::ordered_json j;
    j["width"] = m.width();
    j["height"] = m.height();
    j["foreground"] = m.count();
    j["runs"] = run_lengths(m);
    return j;
}

nlohmann::ordered_json proposals_json(const std::vector<ObjectProposal>& ps) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : ps) {
        nlohmann::ordered_json j;
        j["label"] = p.label;
        j["confidence"] = p.confidence ? nlohmann::ordered_json(*p.confidence) : nlohmann::ordered_json(nullptr);
        j["mask"] = mask_json(p.mask);
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace

nlohmann::ordered_json to_json(const SearchResult& result) {
    nlohmann::ordered_json j;
    j["responses"] = result.responses;
    j["labels"] = result.labels;
    auto comps = nlohmann::ordered_json::array();
    for (const auto& c : result.per_component_labels)
        comps.push_back({{"component", c.component}, {"label", c.label}});
    j["per_component_labels"] = std::move(comps);
    j["live_proposals"] = proposals_json(result.live_proposals);
    j["ref_proposals"] = proposals_json(result.ref_proposals);
    j["live_object_mask"] = mask_json(result.live_object_mask);
    j["ref_object_mask"] = mask_json(result.ref_object_mask);
    return j;
}

}  // namespace doicd
