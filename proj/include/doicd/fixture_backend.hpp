#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "doicd/backend.hpp"

namespace doicd {

// On-disk layout of a fixture set:
//
//   <root>/index.json
//   <root>/<pair_id>/change.png
//   <root>/<pair_id>/describe/<region_index>.txt
//   <root>/<pair_id>/segment/<live|ref>/<url-encoded label>/<k>.png
//
// index.json lists every response file with its request fingerprint:
//
//   {"version": 1, "entries": [
//     {"pair_id": "p", "endpoint": "change", "file": "p/change.png"},
//     {"pair_id": "p", "endpoint": "describe", "region_index": 0, "file": "p/describe/0.txt"},
//     {"pair_id": "p", "endpoint": "segment", "image": "live", "label": "pen", "k": 0,
//      "file": "p/segment/live/pen/0.png", "confidence": 0.8}]}
//
// "confidence" is optional. File paths are relative to the root.

struct FixtureEntry {
    std::string pair_id{};
    std::string endpoint{};
    std::size_t region_index = 0;
    ImageRole image = ImageRole::Live;
    std::string label{};
    std::size_t k = 0;
    std::filesystem::path file{};
    std::optional<double> confidence{};
};

std::string url_encode_label(std::string_view label);
std::string url_decode_label(std::string_view encoded);

class FixtureIndex {
  public:
    /// Reads `<root>/index.json`; every entry must resolve to an existing file.
    /// Falls back to scan() when the directory has no index.
    static FixtureIndex load(const std::filesystem::path& root);
    /// Builds an index by walking the directory layout (no confidences).
    static FixtureIndex scan(const std::filesystem::path& root);

    FixtureIndex(std::filesystem::path root, std::vector<FixtureEntry> entries);

    void save() const;

    const std::filesystem::path& root() const { return root_; }
    const std::vector<FixtureEntry>& entries() const { return entries_; }

    const FixtureEntry* find_change(const std::string& pair_id) const;
    const FixtureEntry* find_describe(const std::string& pair_id, std::size_t region_index) const;
    /// Entries for one (pair, image, label), ordered by k. Empty when none.
    std::vector<const FixtureEntry*> find_segment(const std::string& pair_id, ImageRole image,
                                                  const std::string& label) const;

  private:
    std::filesystem::path root_;
    std::vector<FixtureEntry> entries_;
    std::map<std::string, std::size_t> change_;
    std::map<std::pair<std::string, std::size_t>, std::size_t> describe_;
    std::map<std::tuple<std::string, ImageRole, std::string>, std::vector<std::size_t>> segment_;
};

/// Read-only lookup backend over a FixtureIndex.
class FixtureBackend final : public ModelBackend {
  public:
    explicit FixtureBackend(FixtureIndex index) : index_(std::move(index)) {}

    ProbabilityMask detect_change(const ChangeRequest& req) override;
    std::string describe(const DescribeRequest& req) override;
    std::vector<ObjectProposal> segment(const SegmentRequest& req) override;

    const FixtureIndex& index() const { return index_; }

  private:
    FixtureIndex index_;
};

}  // namespace doicd
