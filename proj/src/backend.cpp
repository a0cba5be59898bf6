#include "doicd/backend.hpp"

namespace doicd {

std::string_view to_string(ImageRole role) {
    return role == ImageRole::Live ? "live" : "ref";
}

ImageRole parse_image_role(std::string_view s) {
    if (s == "live")
        return ImageRole::Live;
    if (s == "ref")
        return ImageRole::Ref;
    throw std::invalid_argument("unknown image role: " + std::string(s));
}

BackendError::BackendError(std::string endpoint, std::string pair_id, const std::string& detail)
    : std::runtime_error("backend endpoint '" + endpoint + "' failed for pair '" + pair_id + "': " + detail),
      endpoint_(std::move(endpoint)),
      pair_id_(std::move(pair_id)) {}

}  // namespace doicd
