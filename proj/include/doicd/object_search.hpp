#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "doicd/backend.hpp"
#include "doicd/mask.hpp"

namespace doicd {

/// Query sent to the multimodal model for every changed region.
inline constexpr std::string_view kDescribePrompt =
    "What is the class name of this object? Please answer like 'This object is ..";

std::string build_prompt();

/// Noun phrase after the first "this object is" (case-insensitive), lowercased,
/// with a leading article and trailing punctuation removed. Absent when the
/// pattern is missing or nothing is left.
std::optional<std::string> parse_label(std::string_view response);

struct LabelFilterConfig {
    std::vector<std::string> banned_words{"floor"};
    /// Whole-word matching keeps e.g. "floorboard"; false drops any label
    /// containing a banned word as a substring.
    bool whole_word = true;
};

bool is_banned_label(std::string_view label, const LabelFilterConfig& config = {});

/// Drops banned labels, then exact duplicates (first occurrence kept).
std::vector<std::string> filter_labels(const std::vector<std::string>& labels, const LabelFilterConfig& config = {});

/// Dilates the base change mask and splits it into connected regions, one per
/// describe query.
std::vector<BinaryMask> prepare_query_regions(const BinaryMask& base_mask, int dilation_iterations,
                                              int kernel = kDefaultDilationKernel);

struct SearchConfig {
    int dilation_iterations = kDefaultDilationIterations;
    int dilation_kernel = kDefaultDilationKernel;
    LabelFilterConfig filter;
    /// Proposals with a confidence below this are discarded; absent confidences are kept.
    double confidence_floor = 0.0;
    std::size_t max_parallel_requests = 1;
};

struct ComponentLabel {
    std::size_t component = 0;
    std::string label;

    bool operator==(const ComponentLabel&) const = default;
};

struct SearchResult {
    std::vector<BinaryMask> query_regions;
    std::vector<std::string> responses;            // raw describe output, per region
    std::vector<std::string> labels;               // pooled and filtered
    std::vector<ComponentLabel> per_component_labels;
    std::vector<ObjectProposal> live_proposals;
    std::vector<ObjectProposal> ref_proposals;
    BinaryMask live_object_mask;  // O_l
    BinaryMask ref_object_mask;   // O_r
};

/// Describe every query region of the base mask on the live image, filter the
/// labels, and segment each surviving label on both images. Backend calls may
/// run concurrently; the result is assembled in region/label order.
SearchResult search_objects(const std::string& pair_id, const Image& live, const Image& ref,
                            const BinaryMask& base_mask, ModelBackend& backend, const SearchConfig& config = {});

nlohmann::ordered_json to_json(const SearchResult& result);

}  // namespace doicd
