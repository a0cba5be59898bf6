#pragma once

#include <memory>
#include <semaphore>
#include <string>

#include "doicd/backend.hpp"

namespace doicd {

// Wire protocol: HTTP/1.1, JSON bodies, images and masks as base64 PNG.
//
//   POST /v1/change    {pair_id, ref_png, image_png}                       -> {prob_png}
//   POST /v1/describe  {pair_id, image_png, region_png, region_index, prompt} -> {text}
//   POST /v1/segment   {pair_id, image_png, image_role, label}              -> {proposals: [{label, mask_png, confidence?}]}
//
// image_png is the live image for /v1/change. Non-200 responses carry
// {error, pair_id?}.

inline constexpr const char* kBackendUrlEnv = "DOICD_BACKEND_URL";

struct HttpBackendConfig {
    std::string base_url;
    double timeout_seconds = 30.0;
    int retries = 0;
    int max_connections = 4;
};

class HttpBackend final : public ModelBackend {
  public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    ProbabilityMask detect_change(const ChangeRequest& req) override;
    std::string describe(const DescribeRequest& req) override;
    std::vector<ObjectProposal> segment(const SegmentRequest& req) override;

    const HttpBackendConfig& config() const { return config_; }

  private:
    std::string post(std::string_view endpoint, const std::string& pair_id, const std::string& body);

    HttpBackendConfig config_;
    std::string host_;       // scheme://host[:port]
    std::string path_base_;  // optional path prefix, no trailing slash
    std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace doicd
