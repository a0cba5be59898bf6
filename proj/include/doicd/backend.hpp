#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "doicd/image.hpp"
#include "doicd/mask.hpp"

namespace doicd {

/// One open-vocabulary segmentation hit.
struct ObjectProposal {
    std::string label;
    BinaryMask mask;
    std::optional<double> confidence;

    bool operator==(const ObjectProposal&) const = default;
};

enum class ImageRole { Live, Ref };

std::string_view to_string(ImageRole role);
ImageRole parse_image_role(std::string_view s);

struct ChangeRequest {
    std::string pair_id;
    const Image& ref;
    const Image& live;
};

struct DescribeRequest {
    std::string pair_id;
    const Image& image;
    const BinaryMask& region;
    std::size_t region_index = 0;
    std::string prompt;
};

struct SegmentRequest {
    std::string pair_id;
    const Image& image;
    ImageRole role = ImageRole::Live;
    std::string label;
};

/// Failure talking to a model backend. Always names the endpoint and pair.
class BackendError : public std::runtime_error {
  public:
    BackendError(std::string endpoint, std::string pair_id, const std::string& detail);

    const std::string& endpoint() const { return endpoint_; }
    const std::string& pair_id() const { return pair_id_; }

  private:
    std::string endpoint_;
    std::string pair_id_;
};

/// The three model roles of the pipeline: base change detection, region
/// description by a multimodal model, and text-prompted segmentation.
/// Implementations must accept concurrent calls.
class ModelBackend {
  public:
    virtual ~ModelBackend() = default;

    virtual ProbabilityMask detect_change(const ChangeRequest& req) = 0;
    virtual std::string describe(const DescribeRequest& req) = 0;
    virtual std::vector<ObjectProposal> segment(const SegmentRequest& req) = 0;
};

inline constexpr std::string_view kEndpointChange = "change";
inline constexpr std::string_view kEndpointDescribe = "describe";
inline constexpr std::string_view kEndpointSegment = "segment";

}  // namespace doicd
